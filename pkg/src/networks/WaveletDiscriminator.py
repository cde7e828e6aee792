import logging

from typing import List

import numpy as np

from pydantic import BaseModel, field_validator

from errors import ShapeError
from networks.ModuleInterface import Module
from networks.layers import Conv2d
from tensor_core.Tensor import as_tensor
from tensor_core.functional import bilinear_resize, leaky_relu
from wavelet.WaveletFeatures import Arrangement, WaveletFeatures
from wavelet.haar import dwt_channelwise, iwt_channelwise

logger = logging.getLogger(__name__)

SKIP_SCALE = 1.0 / np.sqrt(2.0)


class DiscriminatorConfig(BaseModel):
    channels: List[int] = [32, 64, 128, 256]

    @field_validator('channels')
    @classmethod
    def check_channels(cls, value):
        if len(value) < 1:
            raise ValueError('discriminator needs at least one stage')
        for channels in value:
            if channels < 4 or channels % 4:
                raise ValueError(f'channel counts must be positive multiples of 4, got {channels}')
        return value


def wavelet_downsample(x):
    """
    Halves the coefficient resolution: DWT(bilinear_half(IWT(W)))

    Args:
        x (Tensor): N×4c×h×w channelwise coefficients, h and w even

    Returns:
        Tensor: N×4c×h/2×w/2
    """
    spatial = iwt_channelwise(WaveletFeatures(x, Arrangement.CHANNELWISE, x.shape[1] // 4))
    half = bilinear_resize(spatial, spatial.shape[2] // 2, spatial.shape[3] // 2)
    return dwt_channelwise(half).tensor


class DiscriminatorStage(Module):
    """
    Residual conv pair with a 1×1 skip, followed by wavelet downsampling
    """

    def __init__(self, in_channels, out_channels, rng=None):
        self.conv_0 = Conv2d(in_channels, in_channels, 3, rng=rng)
        self.conv_1 = Conv2d(in_channels, out_channels, 3, rng=rng)
        self.conv_s = Conv2d(in_channels, out_channels, 1, bias=False, rng=rng)

    def forward(self, x):
        dx = self.conv_0(leaky_relu(x))
        dx = self.conv_1(leaky_relu(dx))
        out = (self.conv_s(x) + dx) * SKIP_SCALE
        # small inputs stop shrinking once the coefficient grid is odd
        if out.shape[2] % 2 == 0 and out.shape[3] % 2 == 0:
            out = wavelet_downsample(out)
        return out


class WaveletDiscriminator(Module):
    """
    Whole-image discriminator that sees images through their Haar decomposition

    The RGB input is moved to 12 channelwise coefficients, passed through
    residual stages that downsample with IWT → bilinear half → DWT, pooled
    globally and mapped to one realness logit per image.
    """

    def __init__(self, config=None, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config or DiscriminatorConfig()
        channels = self.config.channels
        self.from_wavelet = Conv2d(12, channels[0], 1, rng=rng)
        self.stages = [
            DiscriminatorStage(channels[max(i - 1, 0)], cout, rng=rng)
            for i, cout in enumerate(channels)
        ]
        self.head = Conv2d(channels[-1], 1, 1, rng=rng)

    def forward(self, x):
        """
        Args:
            x (Tensor): N×3×H×W images in [-1, 1], H and W even

        Returns:
            Tensor: N logits
        """
        x = as_tensor(x)
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f'discriminator expects N×3×H×W images, got {x.shape}')
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise ShapeError(f'discriminator needs even extents, got {x.shape[2]}×{x.shape[3]}')
        h = self.from_wavelet(dwt_channelwise(x).tensor)
        for stage in self.stages:
            h = stage(h)
        pooled = leaky_relu(h).mean(axis=(2, 3), keepdims=True)
        return self.head(pooled).reshape(x.shape[0])
