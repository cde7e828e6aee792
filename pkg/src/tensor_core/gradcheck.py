import numpy as np

from tensor_core.Tensor import Tensor


def numeric_grad(fn, arrays, index, step=1e-6, samples=None, rng=None):
    """
    Central finite differences of a scalar function w.r.t. one input, evaluated in 64-bit

    Args:
        fn (callable): maps Tensors to a scalar Tensor
        arrays (list of np.ndarray): inputs
        index (int): input to differentiate
        step (float): finite-difference step
        samples (int, optional): number of random entries to check, all entries if None
        rng (np.random.Generator, optional): picks the checked entries

    Returns:
        tuple: (flat indices checked, numeric derivatives)
    """
    base = [np.asarray(a, dtype=np.float64) for a in arrays]
    target = base[index]
    flat_size = target.size
    if samples is None or samples >= flat_size:
        positions = np.arange(flat_size)
    else:
        rng = rng or np.random.default_rng(0)
        positions = rng.choice(flat_size, size=samples, replace=False)

    def evaluate(values):
        tensors = [Tensor(v, dtype=np.float64) for v in values]
        return fn(*tensors).item()

    derivatives = np.zeros(len(positions))
    for i, position in enumerate(positions):
        plus = [a.copy() for a in base]
        minus = [a.copy() for a in base]
        plus[index].reshape(-1)[position] += step
        minus[index].reshape(-1)[position] -= step
        derivatives[i] = (evaluate(plus) - evaluate(minus)) / (2 * step)
    return positions, derivatives


def analytic_grad(fn, arrays, index, dtype=np.float64):
    tensors = [Tensor(a, requires_grad=(i == index), dtype=dtype) for i, a in enumerate(arrays)]
    loss = fn(*tensors)
    loss.backward()
    grad = tensors[index].grad
    return np.zeros(tensors[index].shape) if grad is None else grad.astype(np.float64)


def grad_check(fn, arrays, index=0, dtype=np.float64, step=1e-6, samples=None, rng=None):
    """
    Relative error between autodiff and finite-difference gradients

    The analytic gradient is taken at `dtype`; the numeric oracle is always 64-bit.

    Returns:
        float: ||analytic - numeric|| / max(||analytic||, ||numeric||)
    """
    positions, numeric = numeric_grad(fn, arrays, index, step=step, samples=samples, rng=rng)
    analytic = analytic_grad(fn, arrays, index, dtype=dtype).reshape(-1)[positions]
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)
