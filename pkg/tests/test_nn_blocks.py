import numpy as np
import pytest

from data.ShapesWorld import generate_world
from data.labels import argmax_labels, one_hot
from errors import ArrangementError, ShapeError, UnpairedDisciplineError
from evaluation.metrics import miou
from losses import class_weights_from_label_maps, seg_loss
from networks import (
    REAL_IMAGE_TAG,
    DiscriminatorConfig,
    GeneratorConfig,
    PixelSpade,
    SemanticLayout,
    Spade,
    UNetConfig,
    UNetSegmenter,
    WaveletDiscriminator,
    WaveletGenerator,
    WaveletResBlock,
    make_3d_noise,
    sample_latents,
    wavelet_upsample,
)
from tensor_core import Adam, Tensor, backward, bilinear_resize, log_softmax, normalize_features
from wavelet import Arrangement, WaveletFeatures, dwt_channelwise, iwt_channelwise


@pytest.fixture
def layout(rng):
    return one_hot(rng.integers(0, 3, size=(2, 8, 8)), 3)


def small_generator(**overrides):
    options = dict(num_classes=3, channels=[8, 8], z_dim=2, spade_hidden=4)
    options.update(overrides)
    return WaveletGenerator(GeneratorConfig(**options), rng=np.random.default_rng(0))


class TestNoise:
    def test_zero_latent_dim_returns_layout(self, layout):
        assert make_3d_noise(layout, 0, seed=1) is layout.mask

    def test_noise_is_spatially_constant(self, layout):
        cond = make_3d_noise(layout, 4, seed=1).data
        np.testing.assert_array_equal(cond[:, :3], layout.mask.data)
        assert cond.shape == (2, 7, 8, 8)
        assert np.all(cond[:, 3:].var(axis=(2, 3)) == 0)

    def test_noise_is_deterministic(self, layout):
        np.testing.assert_array_equal(make_3d_noise(layout, 4, seed=5).data, make_3d_noise(layout, 4, seed=5).data)

    def test_latents_are_standard_normal(self):
        draws = sample_latents(10_000, 1, seed=0)
        assert abs(draws.mean()) < 0.05
        assert abs(draws.var() - 1.0) < 0.05

    def test_negative_latent_dim_rejected(self, layout):
        with pytest.raises(ShapeError):
            make_3d_noise(layout, -1)

    def test_layout_must_be_one_hot(self):
        with pytest.raises(ShapeError):
            SemanticLayout(np.ones((1, 2, 2, 2)))


class TestSpade:
    def test_zero_heads_reduce_to_normalization(self, rng, layout):
        spade = Spade(3, 4, hidden=4, rng=rng)
        x = Tensor(rng.standard_normal((2, 4, 8, 8)))
        np.testing.assert_array_equal(spade(x, layout).data, normalize_features(x).data)

    def test_constant_input_gives_beta(self, rng, layout):
        spade = Spade(3, 4, hidden=4, rng=rng, zero_init_heads=False)
        x = Tensor(np.full((2, 4, 8, 8), 3.0))
        _, beta = spade.modulation(layout.mask, 8, 8)
        np.testing.assert_allclose(spade(x, layout).data, beta.data, atol=1e-5)

    def test_per_channel_affine_invariance(self, rng, layout):
        spade = Spade(3, 4, hidden=4, rng=rng, zero_init_heads=False)
        x = rng.standard_normal((2, 4, 8, 8))
        scale = rng.uniform(1.0, 3.0, size=(1, 4, 1, 1))
        shift = rng.standard_normal((1, 4, 1, 1))
        a = spade(Tensor(x), layout).data
        b = spade(Tensor(x * scale + shift), layout).data
        np.testing.assert_allclose(a, b, atol=1e-4)

    def test_channel_mismatch(self, rng, layout):
        with pytest.raises(ShapeError):
            Spade(3, 4, hidden=4, rng=rng)(Tensor(np.zeros((2, 5, 8, 8))), layout)


class TestPixelSpade:
    def test_equals_composition(self, rng):
        layout = one_hot(rng.integers(0, 3, size=(2, 8, 8)), 3)
        block = PixelSpade(3, 2, hidden=4, rng=rng)
        block.spade.gamma.weight.data = rng.standard_normal(block.spade.gamma.weight.shape).astype(np.float32)
        for _ in range(10):
            features = WaveletFeatures(Tensor(rng.standard_normal((2, 8, 4, 4))), Arrangement.CHANNELWISE, 2)
            expected = dwt_channelwise(block.spade(iwt_channelwise(features), layout)).tensor.data
            np.testing.assert_array_equal(block(features, layout).tensor.data, expected)

    def test_rejects_plain_tensors(self, rng, layout):
        with pytest.raises(ArrangementError):
            PixelSpade(3, 2, hidden=4, rng=rng)(Tensor(np.zeros((2, 8, 4, 4))), layout)


class TestWaveletUpsample:
    def test_equals_composition(self, rng):
        for _ in range(10):
            features = WaveletFeatures(Tensor(rng.standard_normal((1, 8, 4, 4))), Arrangement.CHANNELWISE, 2)
            spatial = iwt_channelwise(features)
            expected = dwt_channelwise(bilinear_resize(spatial, 16, 16)).tensor.data
            np.testing.assert_array_equal(wavelet_upsample(features).tensor.data, expected)

    def test_constant_stays_constant(self):
        coefficients = np.zeros((1, 12, 4, 4))
        coefficients[:, :3] = 2 * 0.4
        out = wavelet_upsample(WaveletFeatures(Tensor(coefficients, dtype=np.float64), Arrangement.CHANNELWISE, 3))
        assert out.shape == (1, 12, 8, 8)
        np.testing.assert_allclose(out.tensor.data[:, :3], 0.8, atol=1e-12)
        np.testing.assert_allclose(out.tensor.data[:, 3:], 0.0, atol=1e-12)

    def test_impulse_integral(self):
        image = np.zeros((1, 1, 8, 8))
        image[0, 0, 3, 4] = 1.0
        features = dwt_channelwise(Tensor(image, dtype=np.float64))
        reconstructed = iwt_channelwise(wavelet_upsample(features)).data
        assert abs(reconstructed.sum() / 4 - image.sum()) < 1e-4

    def test_requires_wavelet_features(self, rng):
        with pytest.raises(ArrangementError):
            wavelet_upsample(Tensor(rng.standard_normal((1, 4, 2, 2))))


class TestWaveletResBlock:
    def test_output_shape(self, rng, layout):
        block = WaveletResBlock(8, 16, 3, spade_hidden=4, rng=rng)
        features = WaveletFeatures(Tensor(rng.standard_normal((2, 8, 4, 4))), Arrangement.CHANNELWISE, 2)
        assert block(features, layout.mask).shape == (2, 16, 8, 8)

    def test_zero_residual_leaves_wavelet_upsample(self, rng, layout):
        block = WaveletResBlock(8, 8, 3, spade_hidden=4, rng=rng)
        block.conv_1.weight.data[:] = 0
        block.conv_1.bias.data[:] = 0
        features = WaveletFeatures(Tensor(rng.standard_normal((2, 8, 4, 4))), Arrangement.CHANNELWISE, 2)
        np.testing.assert_array_equal(block(features, layout.mask).tensor.data, wavelet_upsample(features).tensor.data)

    @pytest.mark.parametrize('use_wu,use_ps,arrangement', [
        (False, False, Arrangement.CHANNELWISE),
        (True, False, Arrangement.CHANNELWISE),
        (True, True, Arrangement.SPATIAL),
        (True, False, Arrangement.SPATIAL),
    ])
    def test_variants_keep_shape_contract(self, rng, layout, use_wu, use_ps, arrangement):
        block = WaveletResBlock(8, 8, 3, arrangement=arrangement, use_wavelet_upsample=use_wu,
                                use_pixel_spade=use_ps, spade_hidden=4, rng=rng)
        if arrangement == Arrangement.CHANNELWISE:
            features = WaveletFeatures(Tensor(rng.standard_normal((2, 8, 4, 4))), arrangement, 2)
            expected = (2, 8, 8, 8)
        else:
            features = WaveletFeatures(Tensor(rng.standard_normal((2, 2, 4, 4))), arrangement, 2)
            expected = (2, 2, 8, 8)
        out = block(features, layout.mask)
        assert out.shape == expected
        assert out.arrangement == arrangement

    def test_arrangement_mismatch(self, rng, layout):
        block = WaveletResBlock(8, 8, 3, spade_hidden=4, rng=rng)
        features = WaveletFeatures(Tensor(rng.standard_normal((2, 2, 4, 4))), Arrangement.SPATIAL, 2)
        with pytest.raises(ArrangementError):
            block(features, layout.mask)


class TestGenerator:
    def test_output_range_and_shape(self, rng):
        generator = small_generator()
        for _ in range(20):
            layout = one_hot(rng.integers(0, 3, size=(2, 16, 16)), 3)
            out = generator(layout, seed=rng).data
            assert out.shape == (2, 3, 16, 16)
            assert np.isfinite(out).all()
            assert out.min() >= -1 and out.max() <= 1

    @pytest.mark.slow
    def test_no_non_finite_values_over_many_draws(self, rng):
        generator = small_generator()
        for _ in range(125):
            layout = one_hot(rng.integers(0, 3, size=(8, 16, 16)), 3)
            out = generator(layout, latents=rng.standard_normal((8, 2)) * 3).data
            assert np.isfinite(out).all()
            assert out.min() >= -1 and out.max() <= 1

    @pytest.mark.parametrize('toggles,name', [
        (dict(), 'iwt_wu_ps'),
        (dict(use_wavelet_upsample=False, use_pixel_spade=False), 'iwt'),
        (dict(arrangement=Arrangement.SPATIAL, use_pixel_spade=False), 'spatial_iwt_wu'),
        (dict(final_iwt=False), 'oasis'),
    ])
    def test_variant_name(self, toggles, name):
        assert GeneratorConfig(num_classes=3, channels=[8], **toggles).variant_name() == name

    def test_latents_change_output(self, rng):
        generator = small_generator()
        for block in generator.body:
            for spade in (block.norm_0.spade, block.norm_1.spade):
                spade.gamma.weight.data = rng.standard_normal(spade.gamma.weight.shape).astype(np.float32) * 0.1
        layout = one_hot(rng.integers(0, 3, size=(2, 16, 16)), 3)
        a = generator(layout, latents=np.zeros((2, 2))).data
        b = generator(layout, latents=np.ones((2, 2))).data
        assert np.abs(a - b).mean() > 0

    def test_indivisible_resolution(self, rng):
        layout = one_hot(rng.integers(0, 3, size=(1, 12, 12)), 3)
        with pytest.raises(ShapeError):
            small_generator()(layout, seed=0)

    def test_class_count_checked(self, rng):
        layout = one_hot(rng.integers(0, 4, size=(1, 16, 16)), 4)
        with pytest.raises(ShapeError):
            small_generator()(layout, seed=0)

    @pytest.mark.parametrize('toggles', [
        dict(use_wavelet_upsample=False, use_pixel_spade=False),
        dict(use_pixel_spade=False),
        dict(),
        dict(arrangement=Arrangement.SPATIAL),
        dict(arrangement=Arrangement.SPATIAL, use_pixel_spade=False),
        dict(final_iwt=False),
    ])
    def test_variants_forward_at_64(self, rng, toggles):
        generator = small_generator(channels=[8, 8, 8, 8], **toggles)
        layout = one_hot(rng.integers(0, 3, size=(1, 64, 64)), 3)
        out = generator(layout, seed=1)
        assert out.shape == (1, 3, 64, 64)
        assert np.isfinite(out.data).all()

    def test_channel_schedule_validated(self):
        with pytest.raises(ValueError):
            GeneratorConfig(num_classes=3, channels=[6])


class TestDiscriminator:
    def test_one_finite_logit_per_image(self, rng):
        discriminator = WaveletDiscriminator(DiscriminatorConfig(channels=[8, 8]), rng=rng)
        logits = discriminator(Tensor(rng.uniform(-1, 1, size=(3, 3, 16, 16)))).data
        assert logits.shape == (3,)
        assert np.isfinite(logits).all()

    def test_odd_extents_rejected(self, rng):
        discriminator = WaveletDiscriminator(DiscriminatorConfig(channels=[8]), rng=rng)
        with pytest.raises(ShapeError):
            discriminator(Tensor(rng.uniform(-1, 1, size=(1, 3, 15, 16))))

    def test_translation_covariance(self, rng):
        discriminator = WaveletDiscriminator(DiscriminatorConfig(channels=[8, 8, 8]), rng=rng)
        offsets = np.linspace(-0.8, 0.8, 8).reshape(8, 1, 1, 1)
        images = np.clip(offsets + 0.05 * rng.standard_normal((8, 3, 32, 32)), -1, 1)
        logits = discriminator(Tensor(images)).data
        shifted = discriminator(Tensor(np.roll(images, 2, axis=3))).data
        assert np.abs(shifted - logits).max() < 0.1 * logits.std()


class TestUNet:
    def test_logits_shape_and_softmax(self, rng):
        unet = UNetSegmenter(UNetConfig(num_classes=3, channels=[4, 8, 8]), rng=rng)
        logits = unet(Tensor(rng.uniform(-1, 1, size=(2, 3, 8, 8))))
        assert logits.shape == (2, 3, 8, 8)
        np.testing.assert_allclose(np.exp(log_softmax(logits).data).sum(axis=1), 1.0, atol=1e-5)

    def test_indivisible_resolution(self, rng):
        unet = UNetSegmenter(UNetConfig(num_classes=3, channels=[4, 8, 8]), rng=rng)
        with pytest.raises(ShapeError):
            unet(Tensor(rng.uniform(-1, 1, size=(1, 3, 6, 8))))

    def test_refuses_real_images(self, rng):
        unet = UNetSegmenter(UNetConfig(num_classes=3, channels=[4, 8]), rng=rng)
        real = Tensor(rng.uniform(-1, 1, size=(1, 3, 8, 8)), tags={REAL_IMAGE_TAG})
        with pytest.raises(UnpairedDisciplineError):
            unet(real)
        oracle = UNetSegmenter(UNetConfig(num_classes=3, channels=[4, 8]), rng=rng, accepts_real_images=True)
        assert oracle(real).shape == (1, 3, 8, 8)

    @pytest.mark.slow
    def test_learns_paired_segmentation(self, tiny_spec):
        samples = generate_world(tiny_spec, 32, n_jobs=1)
        label_maps = np.stack([s.label_map for s in samples])
        images = np.stack([s.image for s in samples])
        weights = class_weights_from_label_maps(label_maps, tiny_spec.num_classes)
        unet = UNetSegmenter(UNetConfig(num_classes=3, channels=[8, 16]), rng=np.random.default_rng(0))
        optimizer = Adam(unet.named_parameters(), lr=3e-3)
        rng = np.random.default_rng(0)
        for _ in range(200):
            idx = rng.choice(32, size=8, replace=False)
            optimizer.zero_grad()
            backward(seg_loss(unet(Tensor(images[idx])), one_hot(label_maps[idx], 3), weights))
            optimizer.step()
        predicted = argmax_labels(unet(Tensor(images)))
        score, _ = miou(predicted, label_maps, 3)
        assert score > 0.5
