import numpy as np

from errors import MissingGradientError, ShapeError


class OptimizerState():
    """
    Adam moment buffers and step counter for a named list of parameters
    """

    def __init__(self, names, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.first_moment = {name: np.zeros(shape, dtype=np.float32) for name, shape in zip(names, shapes)}
        self.second_moment = {name: np.zeros(shape, dtype=np.float32) for name, shape in zip(names, shapes)}

    def buffers(self):
        """
        Yields (name, array) pairs for checkpointing
        """
        for name in self.first_moment:
            yield f'{name}.m', self.first_moment[name]
            yield f'{name}.v', self.second_moment[name]


class Adam():
    """
    Adam with bias correction over a fixed, ordered set of named parameters
    """

    def __init__(self, named_parameters, lr, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(named_parameters)
        self.state = OptimizerState(
            [name for name, _ in self.params],
            [p.shape for _, p in self.params],
            lr=lr,
            beta1=betas[0],
            beta2=betas[1],
            eps=eps,
        )

    def zero_grad(self):
        for _, param in self.params:
            param.zero_grad()

    def step(self):
        """
        Updates every parameter in place from its accumulated gradient

        Raises:
            MissingGradientError: a parameter has no gradient
        """
        state = self.state
        for name, param in self.params:
            if param.grad is None:
                raise MissingGradientError(f'parameter {name} has no gradient')
            if param.grad.shape != param.shape:
                raise ShapeError(f'gradient of {name} has shape {param.grad.shape}, expected {param.shape}')

        state.step += 1
        correction1 = 1.0 - state.beta1 ** state.step
        correction2 = 1.0 - state.beta2 ** state.step
        for name, param in self.params:
            grad = param.grad
            m = state.first_moment[name]
            v = state.second_moment[name]
            m *= state.beta1
            m += (1.0 - state.beta1) * grad
            v *= state.beta2
            v += (1.0 - state.beta2) * grad * grad
            update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
            param.data = (param.data - update).astype(param.dtype, copy=False)
