from collections import OrderedDict

import numpy as np

from errors import CheckpointError
from tensor_core.Tensor import Tensor


class Module():
    """
    Interface used by every network block

    Parameters are the attributes holding a Tensor that requires grad; child
    modules are attributes holding a Module or a list of Modules. Both are
    discovered in attribute order, which fixes the parameter order used by the
    optimizers and checkpoints.
    """

    def forward(self, *args, **kwargs):
        """
        Runs the block

        Returns:
            Tensor | WaveletFeatures: block output
        """
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix=''):
        for name, value in vars(self).items():
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield f'{prefix}{name}', value
            elif isinstance(value, Module):
                yield from value.named_parameters(f'{prefix}{name}.')
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f'{prefix}{name}.{i}.')

    def parameters(self):
        return [param for _, param in self.named_parameters()]

    def num_parameters(self):
        return sum(param.size for param in self.parameters())

    def zero_grad(self):
        for param in self.parameters():
            param.zero_grad()

    def state_dict(self):
        """
        Returns:
            OrderedDict: parameter name -> array (copies)
        """
        return OrderedDict((name, param.data.copy()) for name, param in self.named_parameters())

    def load_state_dict(self, state):
        """
        Replaces parameter values, validating names and shapes first

        Args:
            state (dict): parameter name -> array

        Raises:
            CheckpointError: a parameter is missing or has the wrong shape
        """
        params = OrderedDict(self.named_parameters())
        for name, param in params.items():
            if name not in state:
                raise CheckpointError(f'missing tensor {name}')
            if tuple(np.shape(state[name])) != param.shape:
                raise CheckpointError(
                    f'tensor {name} has shape {tuple(np.shape(state[name]))}, model expects {param.shape}'
                )
        for name, param in params.items():
            param.data = np.array(state[name], dtype=param.dtype)
