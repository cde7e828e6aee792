import logging

from pathlib import Path

import numpy as np

from tqdm import tqdm

from data.ShapesWorld import generate_world
from data.labels import argmax_labels, one_hot
from errors import CheckpointError, WavegenError
from losses import class_weights_from_label_maps, seg_loss
from networks.UNetSegmenter import UNetConfig, UNetSegmenter
from tensor_core.AdamOptimizer import Adam
from tensor_core.Tensor import Tensor, backward
from training.checkpoint import read_checkpoint, write_container

logger = logging.getLogger(__name__)

ORACLE_CACHE = 'oracle_unet.ckpt'
ORACLE_MODES = ('color', 'unet')
# paired renders are drawn far past the dataset indices so they never coincide with them
ORACLE_SAMPLE_OFFSET = 1_000_000


class OracleSegmenter():
    """
    Reference segmenter used only for evaluation

    'color' assigns each pixel the class with the nearest base color; 'unet'
    runs a UNet trained on paired renders of the same world.
    """

    def __init__(self, spec, mode='color', unet=None, batch=8):
        if mode not in ORACLE_MODES:
            raise WavegenError(f'unknown oracle mode {mode!r}, expected one of {ORACLE_MODES}')
        if mode == 'unet' and unet is None:
            raise WavegenError('unet oracle needs a trained UNet')
        self.spec = spec
        self.mode = mode
        self.unet = unet
        self.batch = batch

    def segment(self, images):
        """
        Args:
            images (np.ndarray): 3×H×W or N×3×H×W in [-1, 1]

        Returns:
            np.ndarray: label map(s) with the same leading shape
        """
        images = np.asarray(images)
        single = images.ndim == 3
        if single:
            images = images[None]
        if self.mode == 'color':
            labels = self._nearest_color(images)
        else:
            labels = np.concatenate([
                argmax_labels(self.unet(Tensor(images[i:i + self.batch])))
                for i in range(0, len(images), self.batch)
            ])
        return labels[0] if single else labels

    def _nearest_color(self, images):
        pixels = (images.astype(np.float64) + 1.0) * 127.5
        colors = self.spec.base_colors
        distances = ((pixels[:, None] - colors[None, :, :, None, None]) ** 2).sum(axis=2)
        return distances.argmin(axis=1)

    @classmethod
    def train_unet(cls, spec, samples=256, steps=400, batch=8, lr=1e-3, channels=(16, 32, 64), seed=0, progress=False):
        """
        Trains the UNet oracle on paired (mask, render) samples of a world

        Returns:
            OracleSegmenter: mode 'unet'
        """
        renders = generate_world(spec, samples, start=ORACLE_SAMPLE_OFFSET)
        label_maps = np.stack([s.label_map for s in renders])
        images = np.stack([s.image for s in renders])
        weights = class_weights_from_label_maps(label_maps, spec.num_classes)
        unet = UNetSegmenter(
            UNetConfig(num_classes=spec.num_classes, channels=list(channels)),
            rng=np.random.default_rng(seed),
            accepts_real_images=True,
        )
        optimizer = Adam(unet.named_parameters(), lr=lr)
        rng = np.random.default_rng([seed, ORACLE_SAMPLE_OFFSET])
        for _ in tqdm(range(steps), disable=not progress, desc='oracle'):
            idx = rng.choice(samples, size=min(batch, samples), replace=False)
            optimizer.zero_grad()
            loss = seg_loss(unet(Tensor(images[idx])), one_hot(label_maps[idx], spec.num_classes), weights)
            backward(loss)
            optimizer.step()
        logger.info('trained oracle UNet', extra={'steps': steps, 'final_loss': loss.item() if steps else None})
        return cls(spec, mode='unet', unet=unet, batch=batch)

    def save(self, path):
        manifest = {
            'kind': 'oracle_unet',
            'world': self.spec.to_flat(),
            'channels': list(self.unet.config.channels),
        }
        write_container(path, manifest, self.unet.state_dict())

    @classmethod
    def load(cls, path, spec):
        manifest, tensors = read_checkpoint(path)
        if manifest.get('kind') != 'oracle_unet':
            raise CheckpointError(f'{path} is not an oracle UNet checkpoint')
        if manifest.get('world') != _json_roundtrip(spec.to_flat()):
            raise CheckpointError(f'{path} was trained on a different world')
        unet = UNetSegmenter(
            UNetConfig(num_classes=spec.num_classes, channels=manifest['channels']),
            accepts_real_images=True,
        )
        unet.load_state_dict(tensors)
        return cls(spec, mode='unet', unet=unet)


def _json_roundtrip(values):
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in values.items()}


def load_oracle(mode, spec, dataset_dir=None, **train_options):
    """
    Builds the requested oracle; a UNet oracle is trained once and cached next to the dataset

    Args:
        mode (str): 'color' or 'unet'
        spec (ShapesWorldSpec):
        dataset_dir (str | Path, optional): cache location for the UNet oracle

    Returns:
        OracleSegmenter:
    """
    if mode == 'color':
        return OracleSegmenter(spec, mode='color')
    cache = Path(dataset_dir) / ORACLE_CACHE if dataset_dir is not None else None
    if cache is not None and cache.is_file():
        try:
            return OracleSegmenter.load(cache, spec)
        except CheckpointError as e:
            logger.warning('ignoring oracle cache', extra={'path': str(cache), 'reason': str(e)})
    oracle = OracleSegmenter.train_unet(spec, **train_options)
    if cache is not None:
        oracle.save(cache)
    return oracle
