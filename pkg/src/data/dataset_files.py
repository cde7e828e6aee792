import logging
import os

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from data.ShapesWorld import ShapesWorldSpec
from data.png_io import read_image_png, read_label_png, write_image_png, write_label_png
from errors import DatasetError
from settings import read_flat_config, write_flat_config

logger = logging.getLogger(__name__)

MASKS_DIR = 'masks'
IMAGES_DIR = 'images'
TEST_MASKS_DIR = 'test_masks'
TEST_IMAGES_DIR = 'test_images'
WORLD_CONFIG = 'world.cfg'


def sample_filename(index):
    return f'{index:05d}.png'


def list_filepaths(path, extension='.png'):
    """
    Sorted file paths with the given extension directly inside a folder

    Args:
        path (str | Path): folder path
        extension (str): lower-case extension including the dot

    Returns:
        list of str: file paths
    """
    if not os.path.isdir(path):
        raise DatasetError(f'{path} is not a directory')
    return sorted(
        os.path.join(path, filename)
        for filename in os.listdir(path)
        if os.path.splitext(filename)[1].lower() == extension
    )


@dataclass
class WorldDataset():
    """
    Dataset directory contents: the world spec and the train (and optional test) pools
    """
    spec: ShapesWorldSpec
    label_maps: np.ndarray
    images: np.ndarray
    test_label_maps: Optional[np.ndarray] = None
    test_images: Optional[np.ndarray] = None

    @property
    def num_classes(self):
        return self.spec.num_classes

    def evaluation_label_maps(self):
        """
        Held-out masks when present, the training masks otherwise
        """
        return self.test_label_maps if self.test_label_maps is not None else self.label_maps


def _write_split(root, masks_dir, images_dir, samples, num_classes):
    (root / masks_dir).mkdir(parents=True, exist_ok=True)
    (root / images_dir).mkdir(parents=True, exist_ok=True)
    for index, sample in enumerate(samples):
        write_label_png(root / masks_dir / sample_filename(index), sample.label_map, num_classes)
        write_image_png(root / images_dir / sample_filename(index), sample.image)


def write_dataset(out_dir, spec, samples, test_samples=None):
    """
    Writes masks/, images/, world.cfg and optionally test_masks/, test_images/

    Args:
        out_dir (str | Path):
        spec (ShapesWorldSpec):
        samples (list of WorldSample):
        test_samples (list of WorldSample, optional):
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    _write_split(root, MASKS_DIR, IMAGES_DIR, samples, spec.num_classes)
    if test_samples:
        _write_split(root, TEST_MASKS_DIR, TEST_IMAGES_DIR, test_samples, spec.num_classes)
    write_flat_config(root / WORLD_CONFIG, spec.to_flat())
    logger.info('wrote dataset', extra={'path': str(root), 'count': len(samples), 'test_count': len(test_samples or [])})


def read_world_spec(path):
    config_path = Path(path) / WORLD_CONFIG
    if not config_path.is_file():
        raise DatasetError(f'{path} has no {WORLD_CONFIG}')
    try:
        return ShapesWorldSpec.from_flat(read_flat_config(config_path))
    except (ValueError, KeyError) as e:
        raise DatasetError(f'{config_path} is not a valid world description: {e}')


def _read_pool(paths, reader):
    items = [reader(path) for path in paths]
    shapes = {item.shape for item in items}
    if len(shapes) > 1:
        raise DatasetError(f'files in {os.path.dirname(paths[0])} have differing shapes {sorted(shapes)}')
    return np.stack(items)


def read_label_maps(folder, num_classes):
    paths = list_filepaths(folder)
    if not paths:
        raise DatasetError(f'{folder} contains no PNG files')
    return _read_pool(paths, lambda path: read_label_png(path, num_classes))


def read_images(folder):
    paths = list_filepaths(folder)
    if not paths:
        raise DatasetError(f'{folder} contains no PNG files')
    return _read_pool(paths, read_image_png)


def load_dataset(path):
    """
    Loads a dataset directory; any malformed file is fatal

    Args:
        path (str | Path): directory written by write_dataset

    Returns:
        WorldDataset:
    """
    root = Path(path)
    spec = read_world_spec(root)
    label_maps = read_label_maps(root / MASKS_DIR, spec.num_classes)
    images = read_images(root / IMAGES_DIR)
    expected = (spec.height, spec.width)
    if label_maps.shape[1:] != expected or images.shape[2:] != expected:
        raise DatasetError(f'{root} holds files that are not {spec.height}×{spec.width}')

    test_label_maps = test_images = None
    if (root / TEST_MASKS_DIR).is_dir():
        test_label_maps = read_label_maps(root / TEST_MASKS_DIR, spec.num_classes)
        if (root / TEST_IMAGES_DIR).is_dir():
            test_images = read_images(root / TEST_IMAGES_DIR)
    logger.info('loaded dataset', extra={'path': str(root), 'masks': len(label_maps), 'images': len(images)})
    return WorldDataset(spec, label_maps, images, test_label_maps, test_images)
