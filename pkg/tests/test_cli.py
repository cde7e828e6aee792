import hashlib

import numpy as np
import pandas as pd
import pytest

from PIL import Image

from cli import main
from training.checkpoint import read_checkpoint
from data.png_io import read_image_png, write_image_png, write_label_png
from wavelet.haar import SUBBANDS, waverec

TINY_TRAIN_CONFIG = """\
z_dim = 2
batch = 2
generator_channels = 8, 8
spade_hidden = 4
discriminator_channels = 8, 8
unet_channels = 4, 8
log_every = 1
"""


def tree_digest(root):
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob('*') if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


@pytest.fixture
def dataset_dir(tmp_path):
    out = tmp_path / 'world'
    assert main(['generate-data', '--out', str(out), '--classes', '3', '--size', '16x16',
                 '--count', '6', '--test-count', '2', '--seed', '1']) == 0
    return out


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / 'tiny.cfg'
    path.write_text(TINY_TRAIN_CONFIG)
    return path


class TestGenerateData:
    def test_writes_dataset(self, dataset_dir, capsys):
        assert len(list((dataset_dir / 'masks').glob('*.png'))) == 6
        assert len(list((dataset_dir / 'images').glob('*.png'))) == 6
        assert len(list((dataset_dir / 'test_masks').glob('*.png'))) == 2
        assert (dataset_dir / 'world.cfg').is_file()
        mask = np.asarray(Image.open(dataset_dir / 'masks' / '00000.png'))
        assert mask.shape == (16, 16) and mask.max() < 3

    def test_rerun_is_identical(self, tmp_path, dataset_dir):
        again = tmp_path / 'again'
        assert main(['generate-data', '--out', str(again), '--classes', '3', '--size', '16x16',
                     '--count', '6', '--test-count', '2', '--seed', '1']) == 0
        assert tree_digest(again) == tree_digest(dataset_dir)

    def test_prints_class_summary(self, tmp_path, capsys):
        assert main(['generate-data', '--out', str(tmp_path / 'w'), '--classes', '3', '--size', '16x16',
                     '--count', '2']) == 0
        assert 'pixel_fraction' in capsys.readouterr().out

    def test_rejects_bad_size(self, tmp_path, capsys):
        assert main(['generate-data', '--out', str(tmp_path / 'bad'), '--size', '63x64', '--count', '1']) == 1
        assert 'error: ' in capsys.readouterr().err

    def test_size_from_config_file(self, tmp_path):
        config = tmp_path / 'world.cfg'
        config.write_text('size = 32x32\ncount = 1\nnum_classes = 2\n')
        out = tmp_path / 'w'
        assert main(['generate-data', '--out', str(out), '--config', str(config)]) == 0
        mask = np.asarray(Image.open(out / 'masks' / '00000.png'))
        assert mask.shape == (32, 32)

    def test_unknown_config_option(self, tmp_path, capsys):
        config = tmp_path / 'world.cfg'
        config.write_text('count = 1\nresolution = 32\n')
        assert main(['generate-data', '--out', str(tmp_path / 'w'), '--config', str(config)]) == 1
        assert 'resolution' in capsys.readouterr().err


class TestDwt:
    def test_two_levels(self, tmp_path, rng):
        source = tmp_path / 'in.png'
        write_image_png(source, rng.uniform(-1, 1, size=(3, 16, 16)))
        out = tmp_path / 'bands'
        assert main(['dwt', '--in', str(source), '--out', str(out), '--levels', '2']) == 0
        assert sorted(p.name for p in out.glob('*.png')) == sorted(
            ['LH1.png', 'HL1.png', 'HH1.png', 'LH2.png', 'HL2.png', 'HH2.png', 'LL2.png']
        )
        assert Image.open(out / 'LH1.png').size == (8, 8)
        assert Image.open(out / 'LL2.png').size == (4, 4)

        coefficients = np.load(out / 'coefficients.npz')
        decomposition = [
            {name: coefficients[f'{name}{level}'][None] for name in SUBBANDS[1:]}
            for level in (1, 2)
        ]
        decomposition[-1]['LL'] = coefficients['LL2'][None]
        np.testing.assert_allclose(waverec(decomposition)[0], read_image_png(source), atol=1e-5)

    def test_constant_image_has_flat_details(self, tmp_path):
        source = tmp_path / 'flat.png'
        write_image_png(source, np.full((3, 8, 8), 0.2))
        out = tmp_path / 'bands'
        assert main(['dwt', '--in', str(source), '--out', str(out), '--levels', '1', '--spatial']) == 0
        for name in ('LH1', 'HL1', 'HH1'):
            assert (np.asarray(Image.open(out / f'{name}.png')) == 128).all()
        assert np.asarray(Image.open(out / 'spatial.png')).shape == (8, 8, 3)

    def test_odd_image_fails(self, tmp_path):
        source = tmp_path / 'odd.png'
        write_image_png(source, np.zeros((3, 6, 6)))
        assert main(['dwt', '--in', str(source), '--out', str(tmp_path / 'b'), '--levels', '2']) == 1


def test_train_eval_sample(tmp_path, dataset_dir, tiny_config_file):
    run = tmp_path / 'run'
    assert main(['train', '--data', str(dataset_dir), '--out', str(run), '--config', str(tiny_config_file),
                 '--steps', '2', '--seed', '3']) == 0
    metrics = pd.read_csv(run / 'metrics.csv')
    assert len(metrics) == 2

    assert main(['train', '--data', str(dataset_dir), '--out', str(run), '--config', str(tiny_config_file),
                 '--steps', '3', '--seed', '3', '--resume', str(run / 'checkpoint.ckpt')]) == 0
    assert list(pd.read_csv(run / 'metrics.csv')['step']) == [0, 1, 2]

    report_dir = tmp_path / 'report'
    assert main(['eval', '--data', str(dataset_dir), '--ckpt', str(run / 'checkpoint.ckpt'),
                 '--out', str(report_dir)]) == 0
    report = pd.read_csv(report_dir / 'report.csv')
    assert list(report['metric']) == ['miou', 'spectrum_distance']

    samples = tmp_path / 'samples'
    mask = dataset_dir / 'masks' / '00000.png'
    assert main(['sample', '--ckpt', str(run / 'checkpoint.ckpt'), '--mask', str(mask),
                 '--count', '3', '--out', str(samples), '--seed', '4']) == 0
    assert len(list(samples.glob('sample_*.png'))) == 3
    assert (samples / 'grid.png').is_file()


def test_sample_rejects_unknown_class(tmp_path, dataset_dir, tiny_config_file, capsys):
    run = tmp_path / 'run'
    assert main(['train', '--data', str(dataset_dir), '--out', str(run), '--config', str(tiny_config_file),
                 '--steps', '1']) == 0
    mask = tmp_path / 'bad_mask.png'
    write_label_png(mask, np.full((16, 16), 7))
    assert main(['sample', '--ckpt', str(run / 'checkpoint.ckpt'), '--mask', str(mask),
                 '--out', str(tmp_path / 's')]) == 1
    assert 'error: ' in capsys.readouterr().err


def test_train_flag_toggles(tmp_path, dataset_dir, tiny_config_file):
    run = tmp_path / 'spatial'
    assert main(['train', '--data', str(dataset_dir), '--out', str(run), '--config', str(tiny_config_file),
                 '--steps', '1', '--spatial', '--no-wu', '--no-ps']) == 0
    assert (run / 'checkpoint.ckpt').is_file()


def test_missing_dataset(tmp_path, tiny_config_file):
    assert main(['train', '--data', str(tmp_path / 'nowhere'), '--out', str(tmp_path / 'run'),
                 '--config', str(tiny_config_file), '--steps', '1']) == 1


def test_resume_keeps_checkpoint_architecture(tmp_path, dataset_dir, tiny_config_file):
    run = tmp_path / 'run'
    assert main(['train', '--data', str(dataset_dir), '--out', str(run), '--config', str(tiny_config_file),
                 '--steps', '1', '--no-wu']) == 0
    assert main(['train', '--data', str(dataset_dir), '--out', str(run), '--config', str(tiny_config_file),
                 '--steps', '2', '--resume', str(run / 'checkpoint.ckpt')]) == 0
    manifest, _ = read_checkpoint(run / 'checkpoint.ckpt')
    assert manifest['step'] == 2
    assert manifest['config']['use_wavelet_upsample'] is False
    assert manifest['variant'] == 'iwt_ps'


def test_resume_rejects_conflicting_toggle(tmp_path, dataset_dir, tiny_config_file, capsys):
    run = tmp_path / 'run'
    assert main(['train', '--data', str(dataset_dir), '--out', str(run), '--config', str(tiny_config_file),
                 '--steps', '1']) == 0
    assert main(['train', '--data', str(dataset_dir), '--out', str(run), '--config', str(tiny_config_file),
                 '--steps', '2', '--no-ps', '--resume', str(run / 'checkpoint.ckpt')]) == 1
    assert 'use_pixel_spade' in capsys.readouterr().err
