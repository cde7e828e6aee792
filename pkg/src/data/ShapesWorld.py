import logging

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from joblib import Parallel, delayed
from pydantic import BaseModel, Field, field_validator, model_validator
from skimage.draw import disk, polygon, rectangle

from data.png_io import from_uint8
from settings import worker_count

logger = logging.getLogger(__name__)

SHAPE_KINDS = ('rectangle', 'disk', 'stripe')

# base colors in 8-bit RGB; class 0 is the background
PALETTE = (
    (120, 120, 120),
    (200, 70, 70),
    (70, 180, 70),
    (70, 90, 200),
    (190, 190, 80),
    (150, 80, 180),
    (70, 180, 180),
    (200, 130, 60),
)
TEXTURE_FREQUENCIES = (0.05, 0.25, 0.12, 0.35, 0.18, 0.3, 0.08, 0.22)
TEXTURE_AMPLITUDE = 20.0


class ClassAppearance(BaseModel):
    """
    Base color plus a luminance sinusoid: color + amplitude·sin(2π·f·(x cos θ + y sin θ) + φ)
    """
    color: Tuple[int, int, int]
    frequency: float = Field(0.1, ge=0.0, le=0.5)
    amplitude: float = Field(TEXTURE_AMPLITUDE, ge=0.0)
    angle: float = 0.0

    @field_validator('color')
    @classmethod
    def check_color(cls, value):
        if any(c < 0 or c > 255 for c in value):
            raise ValueError(f'colors are 8-bit RGB, got {value}')
        return value


def default_appearances(num_classes):
    if num_classes > len(PALETTE):
        raise ValueError(f'the default palette has {len(PALETTE)} colors, pass appearances for {num_classes} classes')
    return [
        ClassAppearance(
            color=PALETTE[c],
            frequency=TEXTURE_FREQUENCIES[c],
            amplitude=TEXTURE_AMPLITUDE,
            angle=c * np.pi / num_classes,
        )
        for c in range(num_classes)
    ]


class ShapesWorldSpec(BaseModel):
    """
    Textured-shapes world: colored, textured shapes of classes 1..C-1 over a background class 0
    """
    num_classes: int = Field(4, ge=2)
    height: int = 64
    width: int = 64
    appearances: Optional[List[ClassAppearance]] = None
    min_shapes: int = Field(1, ge=1)
    max_shapes: int = Field(4, ge=1)
    shape_class_weights: Optional[List[float]] = None
    seed: int = 0

    @field_validator('height', 'width')
    @classmethod
    def check_extent(cls, value):
        if value < 16 or value % 16:
            raise ValueError(f'image extents must be positive multiples of 16, got {value}')
        return value

    @model_validator(mode='after')
    def fill_defaults(self):
        if self.appearances is None:
            self.appearances = default_appearances(self.num_classes)
        if len(self.appearances) != self.num_classes:
            raise ValueError(f'{self.num_classes} classes need {self.num_classes} appearances, got {len(self.appearances)}')
        if self.min_shapes > self.max_shapes:
            raise ValueError('min_shapes must not exceed max_shapes')
        if self.shape_class_weights is None:
            self.shape_class_weights = [1.0] * (self.num_classes - 1)
        if len(self.shape_class_weights) != self.num_classes - 1:
            raise ValueError(f'shape_class_weights needs one weight per foreground class ({self.num_classes - 1})')
        if min(self.shape_class_weights) < 0 or sum(self.shape_class_weights) <= 0:
            raise ValueError('shape_class_weights must be non-negative with a positive sum')
        return self

    @property
    def base_colors(self):
        """
        Returns:
            np.ndarray: C×3 float colors in 8-bit units
        """
        return np.array([a.color for a in self.appearances], dtype=np.float64)

    def shape_class_probabilities(self):
        weights = np.asarray(self.shape_class_weights, dtype=np.float64)
        return weights / weights.sum()

    def to_flat(self):
        """
        Flat key/value form stored in world.cfg
        """
        values = {
            'num_classes': self.num_classes,
            'height': self.height,
            'width': self.width,
            'min_shapes': self.min_shapes,
            'max_shapes': self.max_shapes,
            'seed': self.seed,
            'shape_class_weights': list(self.shape_class_weights),
        }
        for c, appearance in enumerate(self.appearances):
            values[f'class_{c}_color'] = list(appearance.color)
            values[f'class_{c}_frequency'] = appearance.frequency
            values[f'class_{c}_amplitude'] = appearance.amplitude
            values[f'class_{c}_angle'] = appearance.angle
        return values

    @classmethod
    def from_flat(cls, values):
        values = dict(values)
        num_classes = int(values['num_classes'])
        appearances = []
        for c in range(num_classes):
            keys = [f'class_{c}_{name}' for name in ('color', 'frequency', 'amplitude', 'angle')]
            if not all(key in values for key in keys):
                appearances = None
                break
            appearances.append(ClassAppearance(
                color=tuple(values.pop(keys[0])),
                frequency=values.pop(keys[1]),
                amplitude=values.pop(keys[2]),
                angle=values.pop(keys[3]),
            ))
        weights = values.get('shape_class_weights')
        if weights is not None and not isinstance(weights, (list, tuple)):
            values['shape_class_weights'] = [weights]
        known = {k: v for k, v in values.items() if k in cls.model_fields}
        return cls(appearances=appearances, **known)


@dataclass
class WorldSample():
    label_map: np.ndarray
    image: np.ndarray
    shapes: List[Tuple[str, int]] = field(default_factory=list)


def sample_rng(seed, index):
    return np.random.default_rng([seed, index])


def _shape_pixels(kind, rng, height, width):
    if kind == 'rectangle':
        extent = (rng.integers(height // 8, height // 2 + 1), rng.integers(width // 8, width // 2 + 1))
        start = (rng.integers(0, height - extent[0] + 1), rng.integers(0, width - extent[1] + 1))
        return rectangle(start, extent=extent, shape=(height, width))
    if kind == 'disk':
        radius = rng.uniform(min(height, width) / 16, min(height, width) / 5)
        center = (rng.uniform(0, height), rng.uniform(0, width))
        return disk(center, radius, shape=(height, width))
    # stripe: a band of random width and orientation through a random point
    theta = rng.uniform(0, np.pi)
    half = rng.uniform(min(height, width) / 20, min(height, width) / 10)
    cy, cx = rng.uniform(0, height), rng.uniform(0, width)
    length = 2 * max(height, width)
    dy, dx = np.sin(theta), np.cos(theta)
    ny, nx = dx, -dy
    rows = np.array([cy - length * dy + half * ny, cy + length * dy + half * ny,
                     cy + length * dy - half * ny, cy - length * dy - half * ny])
    cols = np.array([cx - length * dx + half * nx, cx + length * dx + half * nx,
                     cx + length * dx - half * nx, cx - length * dx - half * nx])
    return polygon(rows, cols, shape=(height, width))


def render_image(spec, label_map, rng):
    """
    Paints every pixel with its class's base color plus that class's texture

    Returns:
        np.ndarray: 3×H×W float32 in [-1, 1], quantized to 8 bits
    """
    height, width = label_map.shape
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    pixels = np.zeros((3, height, width))
    for c, appearance in enumerate(spec.appearances):
        region = label_map == c
        if not region.any():
            continue
        phase = rng.uniform(0, 2 * np.pi)
        coordinate = xx * np.cos(appearance.angle) + yy * np.sin(appearance.angle)
        texture = appearance.amplitude * np.sin(2 * np.pi * appearance.frequency * coordinate + phase)
        for channel in range(3):
            pixels[channel][region] = appearance.color[channel] + texture[region]
    pixels = np.clip(np.round(pixels), 0, 255)
    return from_uint8(pixels)


def render_sample(spec, index):
    """
    Renders world sample `index`; the result depends only on (spec, index)
    """
    rng = sample_rng(spec.seed, index)
    label_map = np.zeros((spec.height, spec.width), dtype=np.int64)
    count = rng.integers(spec.min_shapes, spec.max_shapes + 1)
    probabilities = spec.shape_class_probabilities()
    shapes = []
    for _ in range(count):
        kind = SHAPE_KINDS[rng.integers(len(SHAPE_KINDS))]
        class_id = int(rng.choice(np.arange(1, spec.num_classes), p=probabilities))
        rr, cc = _shape_pixels(kind, rng, spec.height, spec.width)
        label_map[rr, cc] = class_id
        shapes.append((kind, class_id))
    image = render_image(spec, label_map, rng)
    return WorldSample(label_map, image, shapes)


def generate_world(spec, n, start=0, n_jobs=None):
    """
    Renders n (label map, image) pairs

    Args:
        spec (ShapesWorldSpec):
        n (int): at least 1
        start (int): index of the first sample, used to draw disjoint splits
        n_jobs (int, optional): joblib workers, WAVEGEN_THREADS when not given

    Returns:
        list of WorldSample: identical for any worker count
    """
    if n < 1:
        raise ValueError(f'sample count must be >= 1, got {n}')
    n_jobs = n_jobs or worker_count()
    logger.debug('rendering world samples', extra={'count': n, 'start': start, 'workers': n_jobs})
    if n_jobs == 1:
        return [render_sample(spec, i) for i in range(start, start + n)]
    return Parallel(n_jobs=n_jobs)(delayed(render_sample)(spec, i) for i in range(start, start + n))


def class_frequencies(label_maps, num_classes):
    """
    Fraction of pixels per class over a set of label maps
    """
    counts = np.bincount(np.asarray(label_maps).reshape(-1), minlength=num_classes)[:num_classes]
    return counts / max(counts.sum(), 1)
