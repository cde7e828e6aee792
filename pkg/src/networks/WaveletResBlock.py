from errors import ArrangementError, ShapeError
from networks.ModuleInterface import Module
from networks.Spade import CoefficientSpade, PixelSpade, Spade, carrier_channels
from networks.layers import Conv2d
from tensor_core.functional import bilinear_resize, leaky_relu, nearest_resize
from wavelet.WaveletFeatures import Arrangement, WaveletFeatures
from wavelet.haar import dwt, iwt


def wavelet_upsample(features):
    """
    Doubles the coefficient resolution: DWT(bilinear(IWT(W)))

    Args:
        features (WaveletFeatures): N×4c×h×w channelwise (or spatially arranged)

    Returns:
        WaveletFeatures: N×4c×2h×2w in the same arrangement
    """
    if not isinstance(features, WaveletFeatures):
        raise ArrangementError('waveletUpsample expects WaveletFeatures')
    spatial = iwt(features)
    upsampled = bilinear_resize(spatial, 2 * spatial.shape[2], 2 * spatial.shape[3])
    return dwt(upsampled, features.arrangement)


def nearest_upsample(features):
    """
    Nearest ×2 on the coefficient grid; quadrant layouts survive because every
    quadrant scales with the tensor
    """
    tensor = features.tensor
    upsampled = nearest_resize(tensor, 2 * tensor.shape[2], 2 * tensor.shape[3])
    return WaveletFeatures(upsampled, features.arrangement, features.source_channels)


def _wrap(tensor, arrangement):
    if arrangement == Arrangement.CHANNELWISE:
        return WaveletFeatures(tensor, arrangement, tensor.shape[1] // 4)
    return WaveletFeatures(tensor, arrangement, tensor.shape[1])


class WaveletResBlock(Module):
    """
    Residual block that learns in the wavelet domain and doubles resolution

    Identity branch: waveletUpsample (nearest when disabled), then a 1×1 conv if
    the channel count changes. Residual branch: [modulation, leaky ReLU, conv3×3]
    twice, with nearest ×2 before the first conv. Modulation is pixelSPADE, or
    SPADE on the raw coefficients when pixelSPADE is disabled.
    """

    def __init__(self, in_channels, out_channels, cond_channels, arrangement=Arrangement.CHANNELWISE,
                 use_wavelet_upsample=True, use_pixel_spade=True, spade_hidden=32, norm_mode='batch', rng=None):
        for channels in (in_channels, out_channels):
            if channels % 4:
                raise ShapeError(f'wavelet channel counts must be multiples of 4, got {channels}')
        self.arrangement = Arrangement(arrangement)
        self.use_wavelet_upsample = use_wavelet_upsample
        self.in_channels = in_channels
        self.out_channels = out_channels

        fin = carrier_channels(in_channels, self.arrangement)
        fout = carrier_channels(out_channels, self.arrangement)
        fmiddle = carrier_channels(min(in_channels, out_channels), self.arrangement)

        def modulation(carrier):
            if use_pixel_spade:
                source = carrier // 4 if self.arrangement == Arrangement.CHANNELWISE else carrier
                return PixelSpade(cond_channels, source, hidden=spade_hidden, norm_mode=norm_mode, rng=rng)
            return CoefficientSpade(cond_channels, carrier, hidden=spade_hidden, norm_mode=norm_mode, rng=rng)

        self.norm_0 = modulation(fin)
        self.conv_0 = Conv2d(fin, fmiddle, 3, rng=rng)
        self.norm_1 = modulation(fmiddle)
        self.conv_1 = Conv2d(fmiddle, fout, 3, rng=rng)
        self.conv_s = Conv2d(fin, fout, 1, bias=False, rng=rng) if fin != fout else None

    def forward(self, features, cond):
        if not isinstance(features, WaveletFeatures):
            raise ArrangementError('waveletResBlock expects WaveletFeatures')
        features.expect(self.arrangement)
        expected = carrier_channels(self.in_channels, self.arrangement)
        if features.tensor.shape[1] != expected:
            raise ShapeError(f'waveletResBlock expects {expected} channels, got {features.tensor.shape[1]}')

        identity = wavelet_upsample(features) if self.use_wavelet_upsample else nearest_upsample(features)
        x_s = self.conv_s(identity.tensor) if self.conv_s is not None else identity.tensor

        dx = leaky_relu(self.norm_0(features, cond).tensor)
        dx = nearest_resize(dx, 2 * dx.shape[2], 2 * dx.shape[3])
        dx = self.conv_0(dx)
        dx = leaky_relu(self.norm_1(_wrap(dx, self.arrangement), cond).tensor)
        dx = self.conv_1(dx)
        return _wrap(x_s + dx, self.arrangement)


class SpadeResBlock(Module):
    """
    Spatial-domain SPADE ResBlock with nearest ×2 upsampling on both branches
    """

    def __init__(self, in_channels, out_channels, cond_channels, spade_hidden=32, norm_mode='batch', rng=None):
        fmiddle = min(in_channels, out_channels)
        self.norm_0 = Spade(cond_channels, in_channels, hidden=spade_hidden, norm_mode=norm_mode, rng=rng)
        self.conv_0 = Conv2d(in_channels, fmiddle, 3, rng=rng)
        self.norm_1 = Spade(cond_channels, fmiddle, hidden=spade_hidden, norm_mode=norm_mode, rng=rng)
        self.conv_1 = Conv2d(fmiddle, out_channels, 3, rng=rng)
        self.conv_s = Conv2d(in_channels, out_channels, 1, bias=False, rng=rng) if in_channels != out_channels else None

    def forward(self, x, cond):
        h, w = 2 * x.shape[2], 2 * x.shape[3]
        identity = nearest_resize(x, h, w)
        x_s = self.conv_s(identity) if self.conv_s is not None else identity

        dx = leaky_relu(self.norm_0(x, cond))
        dx = self.conv_0(nearest_resize(dx, h, w))
        dx = leaky_relu(self.norm_1(dx, cond))
        dx = self.conv_1(dx)
        return x_s + dx
