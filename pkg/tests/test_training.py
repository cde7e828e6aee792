import hashlib

import numpy as np
import pandas as pd
import pytest

import training.trainer as trainer
from data.labels import one_hot
from errors import TrainingDivergedError
from losses import class_weights_from_label_maps
from networks.UNetSegmenter import REAL_IMAGE_TAG
from training import ModelBundle, fit, load_checkpoint, real_image_batch, save_checkpoint, train_step
from training.config import VARIANTS, TrainConfig


def first_batch(dataset, config):
    layout = one_hot(dataset.label_maps[:config.batch], dataset.num_classes)
    real = real_image_batch(dataset.images[config.batch:2 * config.batch])
    weights = class_weights_from_label_maps(dataset.label_maps, dataset.num_classes)
    return layout, real, weights


def test_train_step_reports_losses(tiny_dataset, tiny_config):
    bundle = ModelBundle(tiny_config, 3)
    record = train_step(bundle, *first_batch(tiny_dataset, tiny_config))
    assert set(record) == {'step', 'loss_seg', 'loss_G_adv', 'loss_D', 'r1'}
    assert record['step'] == 0
    assert bundle.step == 1
    assert all(np.isfinite(v) for v in record.values())
    assert record['loss_D'] >= record['r1'] >= 0


def test_zero_learning_rates_keep_parameters(tiny_dataset, tiny_config):
    config = tiny_config.model_copy(update={'lr_g': 0.0, 'lr_d': 0.0, 'lr_s': 0.0})
    bundle = ModelBundle(config, 3)
    before = {k: v.copy() for k, v in bundle.tensors().items() if not k.startswith('opt_')}
    train_step(bundle, *first_batch(tiny_dataset, config))
    after = bundle.tensors()
    for name, value in before.items():
        np.testing.assert_array_equal(after[name], value, err_msg=name)


def test_segmenter_only_sees_generated_images(tiny_dataset, tiny_config, monkeypatch):
    bundle = ModelBundle(tiny_config, 3)
    seen_tags = []
    original_forward = bundle.segmenter.forward

    def spy_forward(x):
        seen_tags.append(x.tags)
        return original_forward(x)

    bundle.segmenter.forward = spy_forward
    targets = []
    original_seg_loss = trainer.seg_loss

    def spy_seg_loss(logits, layout, weights):
        targets.append(layout)
        return original_seg_loss(logits, layout, weights)

    monkeypatch.setattr(trainer, 'seg_loss', spy_seg_loss)
    layout, real, weights = first_batch(tiny_dataset, tiny_config)
    train_step(bundle, layout, real, weights)
    assert seen_tags and all(REAL_IMAGE_TAG not in tags for tags in seen_tags)
    assert len(targets) == 1 and targets[0] is layout


def test_real_images_are_tagged(tiny_dataset):
    assert REAL_IMAGE_TAG in real_image_batch(tiny_dataset.images[:2]).tags


def test_zero_steps_returns_fresh_bundle(tiny_dataset, tiny_config):
    bundle, history = fit(tiny_config.model_copy(update={'steps': 0}), tiny_dataset, progress=False)
    assert bundle.step == 0
    assert history == []


def test_fit_writes_metrics(tmp_path, tiny_dataset, tiny_config):
    fit(tiny_config.model_copy(update={'steps': 3}), tiny_dataset, out_dir=tmp_path, progress=False)
    df = pd.read_csv(tmp_path / 'metrics.csv')
    assert list(df.columns) == ['step', 'loss_seg', 'loss_G_adv', 'loss_D', 'r1']
    assert list(df['step']) == [0, 1, 2]
    assert (tmp_path / 'checkpoint.ckpt').is_file()


def test_same_seed_same_metrics(tmp_path, tiny_dataset, tiny_config):
    digests = []
    for run in ('a', 'b'):
        fit(tiny_config, tiny_dataset, out_dir=tmp_path / run, progress=False)
        digests.append(hashlib.sha256((tmp_path / run / 'metrics.csv').read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_resume_matches_uninterrupted_run(tmp_path, tiny_dataset, tiny_config):
    config = tiny_config.model_copy(update={'steps': 4})
    straight, _ = fit(config, tiny_dataset, progress=False)

    half, _ = fit(config.model_copy(update={'steps': 2}), tiny_dataset, progress=False)
    save_checkpoint(tmp_path / 'half.ckpt', half)
    resumed = load_checkpoint(tmp_path / 'half.ckpt', config)
    assert resumed.step == 2
    resumed, history = fit(config, tiny_dataset, bundle=resumed, progress=False)

    assert [r['step'] for r in history] == [2, 3]
    expected = straight.tensors()
    for name, value in resumed.tensors().items():
        np.testing.assert_array_equal(value, expected[name], err_msg=name)


def test_divergence_dumps_and_raises(tmp_path, tiny_dataset, tiny_config):
    bundle = ModelBundle(tiny_config, 3)
    bundle.generator.conv_img.bias.data[:] = np.nan
    with pytest.raises(TrainingDivergedError):
        train_step(bundle, *first_batch(tiny_dataset, tiny_config), dump_dir=tmp_path)
    dumps = list(tmp_path.glob('diverged_step_*.npz'))
    assert len(dumps) == 1
    assert 'masks' in np.load(dumps[0])


@pytest.mark.slow
def test_segmentation_loss_falls_without_adversary(tiny_dataset, tiny_config):
    config = tiny_config.model_copy(update={
        'lambda_adv': 0.0, 'lr_d': 0.0, 'r1_gamma': 0.0, 'lr_g': 1e-3, 'lr_s': 1e-3, 'batch': 4, 'steps': 200,
    })
    _, history = fit(config, tiny_dataset, progress=False)
    losses = [r['loss_seg'] for r in history]
    assert np.mean(losses[-10:]) < 0.5 * np.mean(losses[:5])


@pytest.mark.slow
def test_discriminator_separates_frozen_generator(tiny_dataset, tiny_config):
    config = tiny_config.model_copy(update={
        'lr_g': 0.0, 'lr_s': 0.0, 'r1_gamma': 0.0, 'batch': 4, 'steps': 300,
    })
    bundle, _ = fit(config, tiny_dataset, progress=False)
    layout = one_hot(tiny_dataset.label_maps, 3)
    fake = bundle.generator(layout, seed=0).data
    real_logits = bundle.discriminator(tiny_dataset.images).data
    fake_logits = bundle.discriminator(fake).data
    accuracy = np.concatenate([real_logits > 0, fake_logits < 0]).mean()
    assert accuracy > 0.9


def test_steps_go_through_adversarial_losses(tiny_dataset, tiny_config, monkeypatch):
    config = tiny_config.model_copy(update={'r1_gamma': 0.5, 'r1_every': 2, 'lambda_adv': 0.25})
    calls = []
    original = trainer.adversarial_losses

    def spy(discriminator, real, fake, loss_config=None, r1_scale=1.0):
        calls.append((loss_config, r1_scale))
        return original(discriminator, real, fake, loss_config, r1_scale=r1_scale)

    monkeypatch.setattr(trainer, 'adversarial_losses', spy)
    _, history = fit(config, tiny_dataset, progress=False)

    assert [scale for _, scale in calls] == [2, 0, 0, 0]
    assert all(c == config.loss_config() for c, _ in calls)
    assert history[0]['r1'] > 0
    assert history[1]['r1'] == 0


def test_metrics_survive_divergence(tmp_path, tiny_dataset, tiny_config, monkeypatch):
    original = trainer.train_step

    def failing_step(bundle, *args, **kwargs):
        if bundle.step == 2:
            raise TrainingDivergedError('training diverged at step 2: loss is not finite')
        return original(bundle, *args, **kwargs)

    monkeypatch.setattr(trainer, 'train_step', failing_step)
    with pytest.raises(TrainingDivergedError):
        fit(tiny_config.model_copy(update={'steps': 4}), tiny_dataset, out_dir=tmp_path, progress=False)
    assert list(pd.read_csv(tmp_path / 'metrics.csv')['step']) == [0, 1]
    assert not (tmp_path / 'checkpoint.ckpt').exists()


@pytest.mark.parametrize('variant', list(VARIANTS))
def test_variant_keys_name_their_generator(variant):
    assert TrainConfig(**VARIANTS[variant]).generator_config(3).variant_name() == variant
