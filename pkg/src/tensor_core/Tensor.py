import numpy as np

from errors import NonFiniteError, ShapeError

DEFAULT_DTYPE = np.float32


class Function():
    """
    Base class of every differentiable operation

    Subclasses implement `forward` on numpy arrays and `backward`, which receives
    the gradient of the loss w.r.t. the output and returns one gradient (or None)
    per input. State needed by `backward` is stashed on `self` during `forward`.
    """

    def __init__(self, inputs):
        self.inputs = inputs
        self.needs_input_grad = tuple(t.requires_grad for t in inputs)

    def forward(self, *arrays, **kwargs):
        """
        Computes the output array

        Args:
            *arrays (np.ndarray): data of the input tensors

        Returns:
            np.ndarray: output data
        """
        raise NotImplementedError

    def backward(self, grad):
        """
        Computes input gradients

        Args:
            grad (np.ndarray): gradient w.r.t. the output

        Returns:
            tuple: gradient per input, None where not needed
        """
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs, **kwargs):
        inputs = tuple(as_tensor(t) for t in inputs)
        fn = cls(inputs)
        arrays = [t.data for t in inputs]
        dtype = np.result_type(*arrays)
        out = np.asarray(fn.forward(*arrays, **kwargs), dtype=dtype)
        if not np.isfinite(out).all():
            raise NonFiniteError(f'{cls.__name__} produced non-finite values')

        requires_grad = any(fn.needs_input_grad)
        tags = frozenset().union(*(t.tags for t in inputs))
        return Tensor(
            out,
            requires_grad=requires_grad,
            dtype=dtype,
            tags=tags,
            _node=fn if requires_grad else None,
        )

    @staticmethod
    def unbroadcast(grad, shape):
        """
        Sums out broadcast dimensions so that grad matches shape
        """
        if grad.shape == shape:
            return grad
        while grad.ndim > len(shape):
            grad = grad.sum(axis=0)
        for axis, extent in enumerate(shape):
            if extent == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)
        return grad


class Tensor():
    """
    Dense N-dimensional array that can take part in reverse-mode differentiation

    Data is 32-bit float unless a dtype is given; 64-bit is used by the gradient
    oracles. `tags` is a set of provenance labels that every operation propagates
    from its inputs to its output (used to prove real images never reach the
    segmenter).
    """

    def __init__(self, data, requires_grad=False, dtype=None, tags=(), _node=None):
        self.data = np.asarray(data, dtype=dtype or DEFAULT_DTYPE)
        if self.data.ndim == 0:
            self.data = self.data.reshape(())
        self.requires_grad = requires_grad
        self.grad = None
        self.tags = frozenset(tags)
        self._node = _node

    def __repr__(self):
        return f'Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})'

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f'item() needs a single element, tensor has shape {self.shape}')
        return float(self.data.reshape(()))

    def detach(self):
        """
        Returns a tensor sharing data but cut from the tape
        """
        return Tensor(self.data, dtype=self.dtype, tags=self.tags)

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, grad):
        grad = np.asarray(grad, dtype=self.dtype)
        if grad.shape != self.shape:
            raise ShapeError(f'gradient shape {grad.shape} does not match tensor shape {self.shape}')
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    def backward(self):
        backward(self)

    # arithmetic

    def __add__(self, other):
        return Add.apply(self, _like(other, self))

    def __radd__(self, other):
        return Add.apply(_like(other, self), self)

    def __sub__(self, other):
        return Sub.apply(self, _like(other, self))

    def __rsub__(self, other):
        return Sub.apply(_like(other, self), self)

    def __mul__(self, other):
        return Mul.apply(self, _like(other, self))

    def __rmul__(self, other):
        return Mul.apply(_like(other, self), self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError('division by a tensor is not supported')
        return Mul.apply(self, _like(1.0 / other, self))

    def __neg__(self):
        return Mul.apply(self, _like(-1.0, self))

    def sum(self, axis=None, keepdims=False):
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return Mean.apply(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)


def as_tensor(value, dtype=None):
    """
    Wraps arrays and scalars into constant tensors, passes tensors through
    """
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


def _like(value, reference):
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=reference.dtype)


class Add(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return (
            self.unbroadcast(grad, self.shapes[0]),
            self.unbroadcast(grad, self.shapes[1]),
        )


class Sub(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return (
            self.unbroadcast(grad, self.shapes[0]),
            self.unbroadcast(-grad, self.shapes[1]),
        )


class Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        grad_a = self.unbroadcast(grad * self.b, self.a.shape) if self.needs_input_grad[0] else None
        grad_b = self.unbroadcast(grad * self.a, self.b.shape) if self.needs_input_grad[1] else None
        return grad_a, grad_b


class Sum(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.shape = x.shape
        self.axis = axis
        self.keepdims = keepdims
        return x.sum(axis=axis, keepdims=keepdims)

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape),)


class Mean(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.shape = x.shape
        self.axis = axis
        self.keepdims = keepdims
        out = x.mean(axis=axis, keepdims=keepdims)
        self.count = x.size // max(np.size(out), 1)
        return out

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad / self.count, self.shape),)


class Reshape(Function):
    def forward(self, x, shape):
        self.shape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Tape():
    """
    Operations reachable from a root tensor, in topological order

    Every node's inputs precede it; `backward` visits each node exactly once, in
    reverse order.
    """

    def __init__(self, nodes):
        self.nodes = nodes

    def __len__(self):
        return len(self.nodes)

    @classmethod
    def record(cls, root):
        """
        Builds the tape of every tensor that requires grad and leads to root
        """
        order = []
        visited = set()
        stack = [(root, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited or not tensor.requires_grad:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            if tensor._node is not None:
                for parent in tensor._node.inputs:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return cls(order)

    def backward(self, root, seed):
        grads = {id(root): seed}
        for tensor in reversed(self.nodes):
            grad = grads.pop(id(tensor), None)
            if grad is None:
                continue
            tensor.accumulate_grad(grad)
            node = tensor._node
            if node is None:
                continue
            input_grads = node.backward(grad)
            for parent, parent_grad in zip(node.inputs, input_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = np.asarray(parent_grad)


def backward(loss):
    """
    Accumulates d(loss)/d(t) into `t.grad` for every tensor t on loss's tape

    Args:
        loss (Tensor): scalar tensor

    Raises:
        ShapeError: loss is not a scalar
    """
    if loss.size != 1:
        raise ShapeError(f'backward needs a scalar loss, got shape {loss.shape}')
    if not loss.requires_grad:
        return
    tape = Tape.record(loss)
    tape.backward(loss, np.ones(loss.shape, dtype=loss.dtype))
