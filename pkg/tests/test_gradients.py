import numpy as np
import pytest

from networks.SemanticLayout import SemanticLayout
from networks.Spade import PixelSpade, Spade
from networks.WaveletDiscriminator import DiscriminatorConfig, WaveletDiscriminator
from networks.WaveletGenerator import GeneratorConfig, WaveletGenerator
from networks.WaveletResBlock import wavelet_upsample
from data.labels import one_hot
from tensor_core.Tensor import Tensor, backward
from tensor_core.functional import (
    bilinear_resize,
    concat,
    conv2d,
    leaky_relu,
    log_softmax,
    nearest_resize,
    normalize_features,
    softplus,
    tanh,
)
from tensor_core.gradcheck import grad_check
from wavelet.WaveletFeatures import Arrangement, WaveletFeatures
from wavelet.haar import arrange, dwt_channelwise, dwt_spatial, iwt_channelwise, iwt_spatial

SAMPLES = 20


def projection(shape, seed=0):
    return np.random.default_rng(seed).standard_normal(shape)


def weighted_sum(t, seed=0):
    """
    Random linear functional, turns any tensor into a scalar with a generic gradient
    """
    return (t * Tensor(projection(t.shape, seed), dtype=t.dtype)).sum()


def check(fn, arrays, index=0):
    sample_rng = np.random.default_rng(99)
    error_64 = grad_check(fn, arrays, index, dtype=np.float64, samples=SAMPLES, rng=sample_rng)
    sample_rng = np.random.default_rng(99)
    error_32 = grad_check(fn, arrays, index, dtype=np.float32, samples=SAMPLES, rng=sample_rng)
    assert error_64 < 1e-6
    assert error_32 < 1e-3


def away_from_zero(rng, shape):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < 0.05, 0.5, x)


@pytest.mark.parametrize('index', [0, 1, 2])
@pytest.mark.parametrize('stride', [1, 2])
def test_conv2d(rng, index, stride):
    arrays = [rng.standard_normal((2, 3, 6, 6)), rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4)]
    check(lambda x, w, b: weighted_sum(conv2d(x, w, b, stride=stride, padding=1)), arrays, index)


def test_bilinear_resize(rng):
    check(lambda x: weighted_sum(bilinear_resize(x, 9, 4)), [rng.standard_normal((1, 2, 6, 6))])


def test_nearest_resize(rng):
    check(lambda x: weighted_sum(nearest_resize(x, 8, 3)), [rng.standard_normal((1, 2, 4, 6))])


def test_log_softmax(rng):
    check(lambda x: weighted_sum(log_softmax(x)), [rng.standard_normal((2, 4, 3, 3))])


@pytest.mark.parametrize('mode', ['batch', 'instance'])
def test_normalize_features(rng, mode):
    check(lambda x: weighted_sum(normalize_features(x, mode=mode)), [rng.standard_normal((2, 3, 4, 4))])


def test_pointwise_ops(rng):
    x = [away_from_zero(rng, (2, 3, 4))]
    check(lambda t: weighted_sum(leaky_relu(t)), x)
    check(lambda t: weighted_sum(tanh(t)), x)
    check(lambda t: weighted_sum(softplus(t)), x)
    check(lambda t: weighted_sum(t.mean(axis=1) * 3.0) + weighted_sum(t.sum(axis=(0, 2)), seed=1), x)


def test_concat(rng):
    arrays = [rng.standard_normal((1, 2, 3, 3)), rng.standard_normal((1, 4, 3, 3))]
    check(lambda a, b: weighted_sum(concat([a, b])), arrays, 1)


def test_wavelet_transforms(rng):
    x = [rng.standard_normal((2, 3, 8, 8))]
    check(lambda t: weighted_sum(dwt_channelwise(t).tensor), x)
    check(lambda t: weighted_sum(dwt_spatial(t).tensor), x)
    coefficients = [rng.standard_normal((2, 12, 4, 4))]
    check(lambda t: weighted_sum(iwt_channelwise(WaveletFeatures(t, Arrangement.CHANNELWISE, 3))), coefficients)
    check(lambda t: weighted_sum(arrange(WaveletFeatures(t, Arrangement.CHANNELWISE, 3), Arrangement.SPATIAL).tensor), coefficients)
    tiled = [rng.standard_normal((2, 3, 8, 8))]
    check(lambda t: weighted_sum(iwt_spatial(WaveletFeatures(t, Arrangement.SPATIAL, 3))), tiled)


def test_wavelet_upsample(rng):
    coefficients = [rng.standard_normal((1, 8, 4, 4))]
    check(lambda t: weighted_sum(wavelet_upsample(WaveletFeatures(t, Arrangement.CHANNELWISE, 2)).tensor), coefficients)


def test_pixel_spade(rng):
    layout = one_hot(rng.integers(0, 3, size=(2, 8, 8)), 3)
    block = PixelSpade(3, 2, hidden=4, rng=np.random.default_rng(0))
    for name, param in block.named_parameters():
        param.data = np.random.default_rng(len(name)).standard_normal(param.shape).astype(np.float32) * 0.3
    coefficients = [rng.standard_normal((2, 8, 4, 4))]
    check(lambda t: weighted_sum(block(WaveletFeatures(t, Arrangement.CHANNELWISE, 2), layout).tensor), coefficients)


def test_spade_parameter_gradient(rng):
    layout = one_hot(rng.integers(0, 3, size=(2, 4, 4)), 3)
    spade = Spade(3, 2, hidden=4, rng=np.random.default_rng(0), zero_init_heads=False)
    x = Tensor(rng.standard_normal((2, 2, 4, 4)))
    backward(weighted_sum(spade(x, layout)))
    for name, param in spade.named_parameters():
        assert param.grad is not None, name


def test_discriminator_input_gradient(rng):
    discriminator = WaveletDiscriminator(DiscriminatorConfig(channels=[8, 8]), rng=np.random.default_rng(0))
    images = [rng.uniform(-1, 1, size=(1, 3, 16, 16))]
    sample_rng = np.random.default_rng(5)
    error = grad_check(lambda x: discriminator(x).sum(), images, dtype=np.float32, samples=SAMPLES, rng=sample_rng)
    assert error < 1e-2


def test_generator_early_parameter_receives_gradient(rng):
    config = GeneratorConfig(num_classes=3, channels=[8, 8], z_dim=2, spade_hidden=4)
    generator = WaveletGenerator(config, rng=np.random.default_rng(0))
    layout = one_hot(rng.integers(0, 3, size=(2, 16, 16)), 3)
    out = generator(layout, latents=rng.standard_normal((2, 2)))
    backward(weighted_sum(out))
    early = generator.body[0].conv_0.weight
    assert early.grad is not None
    assert np.abs(early.grad).sum() > 0
    assert np.abs(generator.fc.weight.grad).sum() > 0


@pytest.mark.parametrize('index', [0, 1])
def test_conv_normalize_leaky_chain(rng, index):
    arrays = [rng.standard_normal((2, 3, 5, 5)), rng.standard_normal((4, 3, 3, 3))]
    check(lambda x, w: leaky_relu(normalize_features(conv2d(x, w, padding=1))).sum(), arrays, index)
