from networks.ModuleInterface import Module
from networks.SemanticLayout import SemanticLayout, make_3d_noise, sample_latents
from networks.Spade import CoefficientSpade, PixelSpade, Spade
from networks.UNetSegmenter import REAL_IMAGE_TAG, UNetConfig, UNetSegmenter
from networks.WaveletDiscriminator import DiscriminatorConfig, WaveletDiscriminator, wavelet_downsample
from networks.WaveletGenerator import GeneratorConfig, WaveletGenerator
from networks.WaveletResBlock import SpadeResBlock, WaveletResBlock, nearest_upsample, wavelet_upsample
from networks.layers import Conv2d
