class WavegenError(Exception):
    """
    Base class for every error raised by this project
    """


class ShapeError(WavegenError, ValueError):
    """
    Tensor extents or channel counts do not satisfy an operation's contract
    """


class NonFiniteError(WavegenError):
    """
    An operation produced NaN or Inf
    """


class ArrangementError(WavegenError):
    """
    Wavelet features are in the wrong subband arrangement for an operation
    """


class MissingGradientError(WavegenError):
    """
    An optimizer was asked to update a parameter that has no gradient
    """


class CheckpointError(WavegenError):
    """
    A checkpoint is truncated, has the wrong version or does not match the model
    """


class DatasetError(WavegenError):
    """
    A dataset directory, PNG file or label map is malformed
    """


class UnpairedDisciplineError(WavegenError):
    """
    A real image reached a code path that must only see generated images
    """


class TrainingDivergedError(WavegenError):
    """
    A loss became non-finite during training
    """
