from errors import ArrangementError, ShapeError
from networks.ModuleInterface import Module
from networks.SemanticLayout import SemanticLayout
from networks.layers import Conv2d
from tensor_core.functional import leaky_relu, nearest_resize, normalize_features
from wavelet.WaveletFeatures import Arrangement, WaveletFeatures
from wavelet.haar import dwt, iwt


def _conditioning(cond):
    return cond.mask if isinstance(cond, SemanticLayout) else cond


class Spade(Module):
    """
    Spatially-adaptive denormalization

    y = normalize(x) * (1 + gamma(m)) + beta(m), where gamma and beta come from a
    shared conv trunk on the nearest-resized conditioning map. The heads start at
    zero so a fresh layer is a plain normalization.
    """

    def __init__(self, cond_channels, norm_channels, hidden=32, norm_mode='batch', rng=None,
                 zero_init_heads=True):
        self.norm_channels = norm_channels
        self.norm_mode = norm_mode
        self.shared = Conv2d(cond_channels, hidden, 3, rng=rng)
        self.gamma = Conv2d(hidden, norm_channels, 3, rng=rng, zero_init=zero_init_heads)
        self.beta = Conv2d(hidden, norm_channels, 3, rng=rng, zero_init=zero_init_heads)

    def modulation(self, cond, height, width):
        """
        Returns:
            tuple: (gamma, beta) maps at the requested resolution
        """
        cond = nearest_resize(_conditioning(cond), height, width)
        actv = leaky_relu(self.shared(cond))
        return self.gamma(actv), self.beta(actv)

    def forward(self, x, cond):
        cond = _conditioning(cond)
        if x.shape[1] != self.norm_channels:
            raise ShapeError(f'SPADE expects {self.norm_channels} channels, got {x.shape[1]}')
        if cond.shape[0] != x.shape[0]:
            raise ShapeError(f'SPADE batch mismatch: features {x.shape[0]}, layout {cond.shape[0]}')
        gamma, beta = self.modulation(cond, x.shape[2], x.shape[3])
        normalized = normalize_features(x, mode=self.norm_mode)
        return normalized * (gamma + 1.0) + beta


class PixelSpade(Module):
    """
    SPADE applied in the spatial domain of wavelet features: DWT(SPADE(IWT(W), m))
    """

    def __init__(self, cond_channels, source_channels, hidden=32, norm_mode='batch', rng=None):
        self.spade = Spade(cond_channels, source_channels, hidden=hidden, norm_mode=norm_mode, rng=rng)

    def forward(self, features, cond):
        if not isinstance(features, WaveletFeatures):
            raise ArrangementError('pixelSPADE expects WaveletFeatures')
        spatial = iwt(features)
        return dwt(self.spade(spatial, cond), features.arrangement)


class CoefficientSpade(Module):
    """
    SPADE applied directly to the coefficient tensor, whatever its arrangement
    """

    def __init__(self, cond_channels, channels, hidden=32, norm_mode='batch', rng=None):
        self.spade = Spade(cond_channels, channels, hidden=hidden, norm_mode=norm_mode, rng=rng)

    def forward(self, features, cond):
        if not isinstance(features, WaveletFeatures):
            raise ArrangementError('coefficient SPADE expects WaveletFeatures')
        return WaveletFeatures(self.spade(features.tensor, cond), features.arrangement, features.source_channels)


def carrier_channels(wavelet_channels, arrangement):
    """
    Channels of the tensor that carries `wavelet_channels` channelwise coefficients
    """
    if Arrangement(arrangement) == Arrangement.CHANNELWISE:
        return wavelet_channels
    return wavelet_channels // 4
