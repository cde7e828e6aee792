from dataclasses import dataclass
from enum import Enum

from errors import ArrangementError, ShapeError
from tensor_core.Tensor import Tensor


class Arrangement(str, Enum):
    """
    Where the four Haar subbands live inside a tensor

    CHANNELWISE stacks them along channels (4c × h/2 × w/2, all LL channels first);
    SPATIAL tiles them as quadrants [LL | LH ; HL | HH] keeping the source shape.
    """
    CHANNELWISE = 'channelwise'
    SPATIAL = 'spatial'


@dataclass(frozen=True)
class WaveletFeatures():
    tensor: Tensor
    arrangement: Arrangement
    source_channels: int

    def __post_init__(self):
        shape = self.tensor.shape
        if len(shape) != 4:
            raise ShapeError(f'wavelet features must be N×C×H×W, got {shape}')
        if self.arrangement == Arrangement.CHANNELWISE:
            if shape[1] != 4 * self.source_channels:
                raise ShapeError(
                    f'channelwise features need {4 * self.source_channels} channels, got {shape[1]}'
                )
        elif self.arrangement == Arrangement.SPATIAL:
            if shape[1] != self.source_channels:
                raise ShapeError(f'spatial features need {self.source_channels} channels, got {shape[1]}')
            if shape[2] % 2 or shape[3] % 2:
                raise ShapeError(f'spatial features need even extents, got {shape[2]}×{shape[3]}')
        else:
            raise ArrangementError(f'unknown arrangement {self.arrangement!r}')

    @property
    def shape(self):
        return self.tensor.shape

    def expect(self, arrangement):
        if self.arrangement != Arrangement(arrangement):
            raise ArrangementError(f'expected {Arrangement(arrangement).value} features, got {self.arrangement.value}')
        return self
