import numpy as np

from errors import ShapeError
from tensor_core.Tensor import Tensor, as_tensor
from tensor_core.functional import concat


class SemanticLayout():
    """
    One-hot semantic mask m of shape N×C×H×W
    """

    def __init__(self, mask, validate=True):
        self.mask = as_tensor(mask)
        if self.mask.ndim != 4:
            raise ShapeError(f'semantic layout must be N×C×H×W, got {self.mask.shape}')
        if validate:
            data = self.mask.data
            if not np.isin(data, (0, 1)).all():
                raise ShapeError('semantic layout entries must be 0 or 1')
            if not (data.sum(axis=1) == 1).all():
                raise ShapeError('semantic layout must have exactly one active class per pixel')

    @property
    def batch_size(self):
        return self.mask.shape[0]

    @property
    def num_classes(self):
        return self.mask.shape[1]

    @property
    def height(self):
        return self.mask.shape[2]

    @property
    def width(self):
        return self.mask.shape[3]

    def label_maps(self):
        """
        Returns:
            np.ndarray: N×H×W integer class ids
        """
        return self.mask.data.argmax(axis=1)


def sample_latents(batch_size, z_dim, seed=None):
    """
    Draws one zero-mean unit-variance latent vector per sample

    Args:
        batch_size (int):
        z_dim (int):
        seed (int | np.random.Generator, optional):

    Returns:
        np.ndarray: batch_size×z_dim
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.standard_normal((batch_size, z_dim))


def make_3d_noise(layout, z_dim, seed=None, latents=None):
    """
    Concatenates the layout with a latent vector broadcast to every pixel

    Args:
        layout (SemanticLayout):
        z_dim (int): Z >= 0
        seed (int | np.random.Generator, optional): used when latents is None
        latents (np.ndarray, optional): N×Z latent vectors

    Returns:
        Tensor: N×(C+Z)×H×W, first C channels equal m
    """
    if z_dim < 0:
        raise ShapeError(f'latent dimension must be >= 0, got {z_dim}')
    if z_dim == 0:
        return layout.mask
    if latents is None:
        latents = sample_latents(layout.batch_size, z_dim, seed)
    latents = np.asarray(latents)
    if latents.shape != (layout.batch_size, z_dim):
        raise ShapeError(f'latents must have shape {(layout.batch_size, z_dim)}, got {latents.shape}')
    noise = np.broadcast_to(
        latents[:, :, None, None],
        (layout.batch_size, z_dim, layout.height, layout.width),
    )
    return concat([layout.mask, Tensor(noise, dtype=layout.mask.dtype)], axis=1)
