from wavelet.WaveletFeatures import Arrangement, WaveletFeatures
from wavelet.haar import (
    arrange,
    dwt,
    dwt_channelwise,
    dwt_spatial,
    iwt,
    iwt_channelwise,
    iwt_spatial,
)
