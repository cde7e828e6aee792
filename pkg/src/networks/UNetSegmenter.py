from typing import List

import numpy as np

from pydantic import BaseModel, field_validator

from errors import ShapeError, UnpairedDisciplineError
from networks.ModuleInterface import Module
from networks.layers import Conv2d
from tensor_core.Tensor import as_tensor
from tensor_core.functional import bilinear_resize, concat, leaky_relu, nearest_resize

# provenance tag carried by tensors built from dataset images
REAL_IMAGE_TAG = 'real_image'


class UNetConfig(BaseModel):
    num_classes: int
    channels: List[int] = [16, 32, 64]

    @field_validator('channels')
    @classmethod
    def check_channels(cls, value):
        if len(value) < 1 or min(value) < 1:
            raise ValueError('UNet channel schedule must be non-empty and positive')
        return value

    @property
    def depth(self):
        return len(self.channels) - 1


class ConvBlock(Module):
    def __init__(self, in_channels, out_channels, rng=None):
        self.conv_0 = Conv2d(in_channels, out_channels, 3, rng=rng)
        self.conv_1 = Conv2d(out_channels, out_channels, 3, rng=rng)

    def forward(self, x):
        return leaky_relu(self.conv_1(leaky_relu(self.conv_0(x))))


class UNetSegmenter(Module):
    """
    Encoder-decoder segmenter with skip connections

    Each encoder level halves the resolution with a bilinear resize; each decoder
    level doubles it (nearest), concatenates the matching encoder features and
    applies a ConvBlock. The head predicts per-pixel class logits.

    During unpaired training the segmenter must only see generated images;
    inputs tagged as real images are refused unless `accepts_real_images`
    is set (evaluation oracles).
    """

    def __init__(self, config, rng=None, accepts_real_images=False):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        self.accepts_real_images = accepts_real_images
        channels = config.channels
        self.encoder = [ConvBlock(3, channels[0], rng=rng)]
        for cin, cout in zip(channels[:-1], channels[1:]):
            self.encoder.append(ConvBlock(cin, cout, rng=rng))
        self.decoder = [
            ConvBlock(channels[i + 1] + channels[i], channels[i], rng=rng)
            for i in reversed(range(config.depth))
        ]
        self.head = Conv2d(channels[0], config.num_classes, 1, rng=rng)

    def forward(self, x):
        """
        Args:
            x (Tensor): N×3×H×W, H and W divisible by 2**depth

        Returns:
            Tensor: N×C×H×W class logits
        """
        x = as_tensor(x)
        if REAL_IMAGE_TAG in x.tags and not self.accepts_real_images:
            raise UnpairedDisciplineError('segmenter received a real image')
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f'segmenter expects N×3×H×W images, got {x.shape}')
        multiple = 2 ** self.config.depth
        if x.shape[2] % multiple or x.shape[3] % multiple:
            raise ShapeError(f'segmenter of depth {self.config.depth} needs extents divisible by {multiple}, got {x.shape[2]}×{x.shape[3]}')

        skips = []
        h = x
        for i, block in enumerate(self.encoder):
            if i > 0:
                h = bilinear_resize(h, h.shape[2] // 2, h.shape[3] // 2)
            h = block(h)
            skips.append(h)
        for block, skip in zip(self.decoder, reversed(skips[:-1])):
            h = nearest_resize(h, skip.shape[2], skip.shape[3])
            h = block(concat([h, skip], axis=1))
        return self.head(h)
