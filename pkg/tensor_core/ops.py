"""
Differentiable primitives over Tensor

Every primitive validates shapes up front, computes the forward value with numpy
in float64 and records a backward closure when an input tracks gradients.
Implicit broadcasting is limited to scalar-tensor pairs; anything else goes
through the explicit `expand` primitive.
"""

from typing import Callable, Dict, Sequence, Tuple, Union

import numpy as np

from tensor_core.errors import ContractError, NumericDomainError, ShapeError
from tensor_core.tensor import Tensor, check_finite, record

Operand = Union[Tensor, float, int]


def as_tensor(value: Operand) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _finish(kind: str, array: np.ndarray) -> Tensor:
    check_finite(array, kind)
    return Tensor._wrap(array)


def _pair_shapes(kind: str, a: Tensor, b: Tensor):
    if a.shape == b.shape or a.size == 1 and a.ndim == 0 or b.size == 1 and b.ndim == 0:
        return
    raise ShapeError(f"{kind}: shapes {list(a.shape)} and {list(b.shape)} differ (only scalar broadcasting is allowed)")


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Collapse a gradient onto a scalar operand"""
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum()).reshape(shape)


# ---------------- elementwise ----------------

def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _pair_shapes("add", a, b)
    out = _finish("add", a.data + b.data)

    def _backward(g):
        return [_reduce_to(g, a.shape), _reduce_to(g, b.shape)]

    return record("add", [a, b], out, _backward)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _pair_shapes("mul", a, b)
    out = _finish("mul", a.data * b.data)
    a_data, b_data = a.data, b.data

    def _backward(g):
        return [_reduce_to(g * b_data, a.shape), _reduce_to(g * a_data, b.shape)]

    return record("mul", [a, b], out, _backward)


def sigmoid(x: Operand) -> Tensor:
    x = as_tensor(x)
    z = x.data
    pos = z >= 0
    exp_neg = np.exp(-np.abs(z))
    value = np.where(pos, 1.0 / (1.0 + exp_neg), exp_neg / (1.0 + exp_neg))
    out = _finish("sigmoid", value)

    def _backward(g):
        return [g * value * (1.0 - value)]

    return record("sigmoid", [x], out, _backward)


def tanh(x: Operand) -> Tensor:
    x = as_tensor(x)
    value = np.tanh(x.data)
    out = _finish("tanh", value)

    def _backward(g):
        return [g * (1.0 - value * value)]

    return record("tanh", [x], out, _backward)


def log(x: Operand) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise NumericDomainError(f"log: {int(np.sum(x.data <= 0))} non-positive input value(s)")
    out = _finish("log", np.log(x.data))
    x_data = x.data

    def _backward(g):
        return [g / x_data]

    return record("log", [x], out, _backward)


def elementwise_max(a: Operand, b: Operand) -> Tensor:
    """Elementwise maximum; ties route the gradient to the first operand"""
    a, b = as_tensor(a), as_tensor(b)
    _pair_shapes("elementwise-max", a, b)
    take_a = a.data >= b.data
    out = _finish("elementwise-max", np.where(take_a, a.data, b.data))

    def _backward(g):
        return [_reduce_to(np.where(take_a, g, 0.0), a.shape), _reduce_to(np.where(take_a, 0.0, g), b.shape)]

    return record("elementwise-max", [a, b], out, _backward)


def elementwise_min(a: Operand, b: Operand) -> Tensor:
    return mul(elementwise_max(mul(a, -1.0), mul(b, -1.0)), -1.0)


def relu(x: Operand) -> Tensor:
    return elementwise_max(x, 0.0)


def relu6(x: Operand) -> Tensor:
    return elementwise_min(elementwise_max(x, 0.0), 6.0)


def clamp(x: Operand, low: float, high: float) -> Tensor:
    return elementwise_min(elementwise_max(x, low), high)


# ---------------- linear algebra ----------------

def matmul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {list(a.shape)} by {list(b.shape)}")
    out = _finish("matmul", a.data @ b.data)
    a_data, b_data = a.data, b.data

    def _backward(g):
        return [g @ b_data.T, a_data.T @ g]

    return record("matmul", [a, b], out, _backward)


def _conv_geometry(kind, x_shape, kernel_hw, stride, padding):
    if len(stride) != 2 or len(padding) != 2:
        raise ContractError(f"{kind}: stride and padding must be pairs, got {stride} and {padding}")
    if min(stride) < 1 or min(padding) < 0:
        raise ContractError(f"{kind}: stride must be >= 1 and padding >= 0, got {stride} and {padding}")
    _, _, height, width = x_shape
    kh, kw = kernel_hw
    out_h = (height + 2 * padding[0] - kh) // stride[0] + 1
    out_w = (width + 2 * padding[1] - kw) // stride[1] + 1
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"{kind}: kernel {kh}x{kw} does not fit input {height}x{width} with padding {padding}")
    return out_h, out_w


def _pad(x: np.ndarray, padding) -> np.ndarray:
    ph, pw = padding
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))


def _window(xp: np.ndarray, ky, kx, stride, out_hw):
    sh, sw = stride
    oh, ow = out_hw
    return (slice(None), slice(None), slice(ky, ky + sh * (oh - 1) + 1, sh), slice(kx, kx + sw * (ow - 1) + 1, sw))


def conv2d(x: Operand, w: Operand, stride=(1, 1), padding=(0, 0)) -> Tensor:
    """
    Cross-correlation of x [N, C, H, W] with w [O, C, kh, kw]

    Computed as a sum over kernel offsets so no im2col buffer is materialized.
    """
    x, w = as_tensor(x), as_tensor(w)
    stride, padding = tuple(stride), tuple(padding)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d: input {list(x.shape)} incompatible with kernel {list(w.shape)}")
    out_h, out_w = _conv_geometry("conv2d", x.shape, w.shape[2:], stride, padding)
    xp = _pad(x.data, padding)
    w_data = w.data
    n, o = x.shape[0], w.shape[0]

    acc = np.zeros((n, out_h, out_w, o))
    for ky in range(w.shape[2]):
        for kx in range(w.shape[3]):
            patch = xp[_window(xp, ky, kx, stride, (out_h, out_w))]
            acc += np.tensordot(patch, w_data[:, :, ky, kx], axes=([1], [1]))
    out = _finish("conv2d", np.ascontiguousarray(acc.transpose(0, 3, 1, 2)))

    def _backward(g):
        g_nhwo = g.transpose(0, 2, 3, 1)
        grad_xp = np.zeros_like(xp)
        grad_w = np.zeros_like(w_data)
        for ky in range(w_data.shape[2]):
            for kx in range(w_data.shape[3]):
                window = _window(xp, ky, kx, stride, (out_h, out_w))
                grad_w[:, :, ky, kx] = np.tensordot(g, xp[window], axes=([0, 2, 3], [0, 2, 3]))
                grad_xp[window] += np.tensordot(g_nhwo, w_data[:, :, ky, kx], axes=([3], [0])).transpose(0, 3, 1, 2)
        ph, pw = padding
        grad_x = grad_xp[:, :, ph : ph + x.shape[2], pw : pw + x.shape[3]]
        return [grad_x, grad_w]

    return record("conv2d", [x, w], out, _backward)


def depthwise_conv2d(x: Operand, w: Operand, stride=(1, 1), padding=(0, 0)) -> Tensor:
    """Per-channel cross-correlation of x [N, C, H, W] with w [C, 1, kh, kw]"""
    x, w = as_tensor(x), as_tensor(w)
    stride, padding = tuple(stride), tuple(padding)
    if x.ndim != 4 or w.ndim != 4 or w.shape[1] != 1 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"depthwise-conv2d: input {list(x.shape)} incompatible with kernel {list(w.shape)}")
    out_h, out_w = _conv_geometry("depthwise-conv2d", x.shape, w.shape[2:], stride, padding)
    xp = _pad(x.data, padding)
    w_data = w.data

    acc = np.zeros((x.shape[0], x.shape[1], out_h, out_w))
    for ky in range(w.shape[2]):
        for kx in range(w.shape[3]):
            patch = xp[_window(xp, ky, kx, stride, (out_h, out_w))]
            acc += patch * w_data[:, 0, ky, kx][None, :, None, None]
    out = _finish("depthwise-conv2d", acc)

    def _backward(g):
        grad_xp = np.zeros_like(xp)
        grad_w = np.zeros_like(w_data)
        for ky in range(w_data.shape[2]):
            for kx in range(w_data.shape[3]):
                window = _window(xp, ky, kx, stride, (out_h, out_w))
                grad_w[:, 0, ky, kx] = np.einsum("nchw,nchw->c", g, xp[window])
                grad_xp[window] += g * w_data[:, 0, ky, kx][None, :, None, None]
        ph, pw = padding
        return [grad_xp[:, :, ph : ph + x.shape[2], pw : pw + x.shape[3]], grad_w]

    return record("depthwise-conv2d", [x, w], out, _backward)


# ---------------- reductions ----------------

def _normalize_axes(kind: str, axes, ndim: int) -> Tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    normalized = []
    for axis in axes:
        if not -ndim <= axis < ndim:
            raise ContractError(f"{kind}: axis {axis} out of range for {ndim}-d tensor")
        normalized.append(axis % ndim)
    if len(set(normalized)) != len(normalized):
        raise ContractError(f"{kind}: repeated axes {axes}")
    return tuple(sorted(normalized))


def reduce_sum(x: Operand, axes=None) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes("sum", axes, x.ndim)
    out = _finish("sum", np.asarray(x.data.sum(axis=axes)))
    kept = tuple(1 if i in axes else d for i, d in enumerate(x.shape))

    def _backward(g):
        return [np.broadcast_to(g.reshape(kept), x.shape).copy()]

    return record("sum", [x], out, _backward)


def avg_pool(x: Operand, axes=None) -> Tensor:
    """Arithmetic mean over the given axes (all axes when None)"""
    x = as_tensor(x)
    axes = _normalize_axes("avg-pool", axes, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes]))
    out = _finish("avg-pool", np.asarray(x.data.sum(axis=axes) / count))
    kept = tuple(1 if i in axes else d for i, d in enumerate(x.shape))

    def _backward(g):
        return [np.broadcast_to(g.reshape(kept) / count, x.shape).copy()]

    return record("avg-pool", [x], out, _backward)


# ---------------- movement ----------------

def concat(inputs: Sequence[Operand], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in inputs]
    if not tensors:
        raise ContractError("concat: no inputs")
    ndim = tensors[0].ndim
    if not -ndim <= axis < ndim:
        raise ContractError(f"concat: axis {axis} out of range for {ndim}-d tensors")
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis):
            raise ShapeError(
                f"concat: shapes {[list(t.shape) for t in tensors]} differ outside axis {axis}"
            )
    out = _finish("concat", np.concatenate([t.data for t in tensors], axis=axis))
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def _backward(g):
        grads = []
        for start, stop in zip(bounds[:-1], bounds[1:]):
            index = [slice(None)] * ndim
            index[axis] = slice(int(start), int(stop))
            grads.append(g[tuple(index)].copy())
        return grads

    return record("concat", tensors, out, _backward)


def slice_axis(x: Operand, axis: int, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ContractError(f"slice: axis {axis} out of range for {x.ndim}-d tensor")
    axis = axis % x.ndim
    if not 0 <= start < stop <= x.shape[axis]:
        raise ContractError(f"slice: range [{start}, {stop}) invalid for axis of length {x.shape[axis]}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = _finish("slice", x.data[index].copy())

    def _backward(g):
        grad = np.zeros_like(x.data)
        grad[index] = g
        return [grad]

    return record("slice", [x], out, _backward)


def reshape(x: Operand, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    shape = tuple(int(d) for d in shape)
    if int(np.prod(shape)) != x.size or any(d <= 0 for d in shape):
        raise ShapeError(f"reshape: cannot view {list(x.shape)} as {list(shape)}")
    out = _finish("reshape", x.data.reshape(shape).copy())

    def _backward(g):
        return [g.reshape(x.shape)]

    return record("reshape", [x], out, _backward)


def transpose(x: Operand, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ContractError(f"transpose: {axes} is not a permutation of {x.ndim} axes")
    inverse = tuple(np.argsort(axes))
    out = _finish("transpose", np.ascontiguousarray(x.data.transpose(axes)))

    def _backward(g):
        return [np.ascontiguousarray(g.transpose(inverse))]

    return record("transpose", [x], out, _backward)


def expand(x: Operand, shape: Sequence[int]) -> Tensor:
    """Explicit broadcast of x to shape (numpy broadcasting rules)"""
    x = as_tensor(x)
    shape = tuple(int(d) for d in shape)
    try:
        value = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise ShapeError(f"expand: cannot broadcast {list(x.shape)} to {list(shape)}")
    out = _finish("expand", value)
    lead = len(shape) - x.ndim
    summed = tuple(range(lead)) + tuple(lead + i for i, d in enumerate(x.shape) if d == 1 and shape[lead + i] != 1)

    def _backward(g):
        return [g.sum(axis=summed).reshape(x.shape) if summed else g]

    return record("expand", [x], out, _backward)


# ---------------- dispatch ----------------

PRIMITIVES: Dict[str, Callable[..., Tensor]] = {
    "add": add,
    "mul": mul,
    "matmul": matmul,
    "conv2d": conv2d,
    "depthwise-conv2d": depthwise_conv2d,
    "concat": lambda *inputs, axis=0: concat(inputs, axis=axis),
    "avg-pool": avg_pool,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "log": log,
    "slice": slice_axis,
    "reshape": reshape,
    "elementwise-max": elementwise_max,
    "sum": reduce_sum,
    "transpose": transpose,
    "expand": expand,
}


def apply_primitive(kind: str, inputs: Sequence[Operand], **attrs) -> Tensor:
    """
    Apply one primitive by name

    Args:
        kind: Primitive name, one of PRIMITIVES
        inputs: Operand tensors
        **attrs: Op attributes (stride, padding, axis, axes, shape, start, stop)

    Returns:
        Output tensor, recorded in the graph when any input requires grad
    """
    if kind not in PRIMITIVES:
        raise ContractError(f"Unknown primitive '{kind}'; expected one of {sorted(PRIMITIVES)}")
    return PRIMITIVES[kind](*inputs, **attrs)
