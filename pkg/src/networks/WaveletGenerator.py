import logging

from typing import List, Literal

import numpy as np

from pydantic import BaseModel, field_validator

from errors import ShapeError
from networks.ModuleInterface import Module
from networks.SemanticLayout import SemanticLayout, make_3d_noise
from networks.Spade import carrier_channels
from networks.WaveletResBlock import SpadeResBlock, WaveletResBlock
from networks.layers import Conv2d
from tensor_core.functional import leaky_relu, nearest_resize, tanh
from wavelet.WaveletFeatures import Arrangement, WaveletFeatures
from wavelet.haar import dwt, iwt

logger = logging.getLogger(__name__)


class GeneratorConfig(BaseModel):
    """
    Architecture of the waveletSPADE generator and its ablation toggles

    `channels` lists the output channels of each waveletResBlock, counted as
    channelwise wavelet channels (multiples of 4). `final_iwt=False` drops the
    wavelet domain entirely and builds the spatial SPADE baseline.
    """
    num_classes: int
    channels: List[int] = [128, 128, 64, 32]
    z_dim: int = 16
    spade_hidden: int = 32
    use_wavelet_upsample: bool = True
    use_pixel_spade: bool = True
    arrangement: Arrangement = Arrangement.CHANNELWISE
    final_iwt: bool = True
    norm_mode: Literal['batch', 'instance'] = 'batch'

    @field_validator('num_classes')
    @classmethod
    def check_classes(cls, value):
        if value < 1:
            raise ValueError('num_classes must be >= 1')
        return value

    @field_validator('channels')
    @classmethod
    def check_channels(cls, value):
        if len(value) < 1:
            raise ValueError('channel schedule needs at least one block')
        for channels in value:
            if channels < 4 or channels % 4:
                raise ValueError(f'channel counts must be positive multiples of 4, got {channels}')
        return value

    @field_validator('z_dim')
    @classmethod
    def check_z_dim(cls, value):
        if value < 0:
            raise ValueError('z_dim must be >= 0')
        return value

    @property
    def num_blocks(self):
        return len(self.channels)

    @property
    def resolution_multiple(self):
        """
        Image extents must be divisible by this
        """
        return 2 ** (self.num_blocks + 1) if self.final_iwt else 2 ** self.num_blocks

    def variant_name(self):
        if not self.final_iwt:
            return 'oasis'
        name = 'spatial_iwt' if self.arrangement == Arrangement.SPATIAL else 'iwt'
        if self.use_wavelet_upsample:
            name += '_wu'
        if self.use_pixel_spade:
            name += '_ps'
        return name


class WaveletGenerator(Module):
    """
    waveletSPADE generator

    concat(m, z) is nearest-downsampled to the initial resolution, convolved,
    moved to the wavelet domain, passed through the waveletResBlocks, mapped to
    4·3 wavelet channels, inverse transformed to RGB and squashed by tanh.
    """

    def __init__(self, config, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        cond_channels = config.num_classes + config.z_dim
        schedule = config.channels
        arrangement = config.arrangement if config.final_iwt else Arrangement.SPATIAL

        self.fc = Conv2d(cond_channels, schedule[0] // 4, 3, rng=rng)
        self.body = []
        for i, fout in enumerate(schedule):
            fin = schedule[max(i - 1, 0)]
            if config.final_iwt:
                block = WaveletResBlock(
                    fin, fout, cond_channels,
                    arrangement=config.arrangement,
                    use_wavelet_upsample=config.use_wavelet_upsample,
                    use_pixel_spade=config.use_pixel_spade,
                    spade_hidden=config.spade_hidden,
                    norm_mode=config.norm_mode,
                    rng=rng,
                )
            else:
                block = SpadeResBlock(
                    fin // 4, fout // 4, cond_channels,
                    spade_hidden=config.spade_hidden,
                    norm_mode=config.norm_mode,
                    rng=rng,
                )
            self.body.append(block)

        last = carrier_channels(schedule[-1], arrangement)
        out_channels = 12 if config.final_iwt and config.arrangement == Arrangement.CHANNELWISE else 3
        self.conv_img = Conv2d(last, out_channels, 3, rng=rng)

    def initial_resolution(self, height, width):
        multiple = self.config.resolution_multiple
        if height % multiple or width % multiple:
            raise ShapeError(f'generator with {self.config.num_blocks} blocks needs extents divisible by {multiple}, got {height}×{width}')
        return height // 2 ** self.config.num_blocks, width // 2 ** self.config.num_blocks

    def forward(self, layout, latents=None, seed=None):
        """
        Synthesizes images from semantic layouts

        Args:
            layout (SemanticLayout): N×C×H×W one-hot mask
            latents (np.ndarray, optional): N×Z latent vectors
            seed (int | np.random.Generator, optional): draws latents when none are given

        Returns:
            Tensor: N×3×H×W in [-1, 1]
        """
        if not isinstance(layout, SemanticLayout):
            layout = SemanticLayout(layout)
        config = self.config
        if layout.num_classes != config.num_classes:
            raise ShapeError(f'generator built for {config.num_classes} classes, layout has {layout.num_classes}')
        init_h, init_w = self.initial_resolution(layout.height, layout.width)

        cond = make_3d_noise(layout, config.z_dim, seed=seed, latents=latents)
        x = self.fc(nearest_resize(cond, init_h, init_w))

        if config.final_iwt:
            features = dwt(x, config.arrangement)
            for block in self.body:
                features = block(features, cond)
            out = self.conv_img(leaky_relu(features.tensor))
            source = 3 if config.arrangement == Arrangement.SPATIAL else out.shape[1] // 4
            image = iwt(WaveletFeatures(out, config.arrangement, source))
        else:
            for block in self.body:
                x = block(x, cond)
            image = self.conv_img(leaky_relu(x))
        return tanh(image)
