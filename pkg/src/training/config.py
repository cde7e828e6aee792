from typing import List, Literal

from pydantic import BaseModel, Field

from losses import LossConfig
from networks.UNetSegmenter import UNetConfig
from networks.WaveletDiscriminator import DiscriminatorConfig
from networks.WaveletGenerator import GeneratorConfig
from wavelet.WaveletFeatures import Arrangement

ARCHITECTURE_FIELDS = (
    'z_dim', 'generator_channels', 'spade_hidden', 'use_wavelet_upsample', 'use_pixel_spade',
    'arrangement', 'final_iwt', 'norm_mode', 'discriminator_channels', 'unet_channels',
)


class TrainConfig(BaseModel):
    """
    Hyperparameters of an unpaired training run

    Generator toggles mirror the ablation variants: defaults give the full model
    (channelwise, waveletUpsample and pixelSPADE on).
    """
    lambda_adv: float = Field(1.0, ge=0.0)
    z_dim: int = Field(16, ge=0)
    lr_g: float = Field(1e-4, ge=0.0)
    lr_d: float = Field(4e-4, ge=0.0)
    lr_s: float = Field(1e-4, ge=0.0)
    betas_g: List[float] = [0.0, 0.99]
    betas_d: List[float] = [0.0, 0.99]
    betas_s: List[float] = [0.9, 0.999]
    batch: int = Field(8, ge=1)
    steps: int = Field(1000, ge=0)
    r1_gamma: float = Field(1.0, ge=0.0)
    r1_every: int = Field(1, ge=1)
    seed: int = 0

    generator_channels: List[int] = [128, 128, 64, 32]
    spade_hidden: int = Field(32, ge=1)
    use_wavelet_upsample: bool = True
    use_pixel_spade: bool = True
    arrangement: Arrangement = Arrangement.CHANNELWISE
    final_iwt: bool = True
    norm_mode: Literal['batch', 'instance'] = 'batch'
    discriminator_channels: List[int] = [32, 64, 128, 256]
    unet_channels: List[int] = [16, 32, 64]

    checkpoint_every: int = Field(0, ge=0)
    sample_every: int = Field(0, ge=0)
    log_every: int = Field(50, ge=1)

    def generator_config(self, num_classes):
        return GeneratorConfig(
            num_classes=num_classes,
            channels=self.generator_channels,
            z_dim=self.z_dim,
            spade_hidden=self.spade_hidden,
            use_wavelet_upsample=self.use_wavelet_upsample,
            use_pixel_spade=self.use_pixel_spade,
            arrangement=self.arrangement,
            final_iwt=self.final_iwt,
            norm_mode=self.norm_mode,
        )

    def discriminator_config(self):
        return DiscriminatorConfig(channels=self.discriminator_channels)

    def unet_config(self, num_classes):
        return UNetConfig(num_classes=num_classes, channels=self.unet_channels)

    def loss_config(self):
        return LossConfig(lambda_adv=self.lambda_adv, r1_gamma=self.r1_gamma)

    def architecture(self):
        """
        Options that fix the networks; a checkpoint only loads into a config that agrees on all of them
        """
        return {name: getattr(self, name) for name in ARCHITECTURE_FIELDS}


# command line toggles that select an architecture variant
VARIANTS = {
    'oasis': {'final_iwt': False},
    'iwt': {'use_wavelet_upsample': False, 'use_pixel_spade': False},
    'iwt_wu': {'use_pixel_spade': False},
    'iwt_wu_ps': {},
    'spatial_iwt_wu': {'arrangement': Arrangement.SPATIAL, 'use_pixel_spade': False},
    'spatial_iwt_wu_ps': {'arrangement': Arrangement.SPATIAL},
}
