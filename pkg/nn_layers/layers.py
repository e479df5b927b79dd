"""
Layer inventory: fully connected, 2-D convolution, inverted-residual bottleneck,
unidirectional LSTM, average pooling and the sigmoid scoring head
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from nn_layers.registry import LayerSpec, ParamRegistry
from tensor_core.errors import ContractError, ShapeError
from tensor_core.ops import (
    add,
    avg_pool,
    concat,
    conv2d,
    depthwise_conv2d,
    expand,
    matmul,
    mul,
    relu6,
    reshape,
    sigmoid,
    slice_axis,
    tanh,
)
from tensor_core.tensor import Tensor

Shape = Tuple[int, ...]


def uniform_init(rng: np.random.Generator, shape: Sequence[int], bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=tuple(shape))


class Layer:
    """Common bookkeeping for registry-backed layers"""

    kind = ""
    layer_type = ""

    def __init__(self, registry: ParamRegistry, name: str):
        self.registry = registry
        self.name = name
        self._param_names: List[str] = []

    def _register(self, suffix: str, value: np.ndarray, prunable: bool, scale: float = 1.0) -> str:
        full = f"{self.name}.{suffix}"
        self.registry.add(full, value, layer_type=self.layer_type, prunable=prunable, scale=scale)
        self._param_names.append(full)
        return full

    @property
    def param_names(self) -> List[str]:
        return list(self._param_names)

    @property
    def spec(self) -> LayerSpec:
        return LayerSpec(kind=self.kind, name=self.name, dims=self.dims())

    def dims(self) -> dict:
        return {}

    def param_count(self) -> int:
        return sum(self.registry[name].weight.size for name in self._param_names)

    def pruned_count(self) -> int:
        names = set(self._param_names)
        return self.registry.pruned_count(lambda n: n in names)

    def output_shape(self, in_shape: Shape) -> Shape:
        raise NotImplementedError

    def flops(self, in_shape: Shape) -> int:
        return 0


class FullyConnected(Layer):
    kind = "fc"
    layer_type = "fc"

    def __init__(self, registry, name, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__(registry, name)
        if in_features <= 0 or out_features <= 0:
            raise ContractError(f"{name}: fc dims must be positive, got {in_features}->{out_features}")
        self.in_features = in_features
        self.out_features = out_features
        bound = 1.0 / np.sqrt(in_features)
        weight = uniform_init(rng, (in_features, out_features), bound)
        self.weight = self._register("weight", weight, prunable=True, scale=bound)
        self.bias = self._register("bias", uniform_init(rng, (out_features,), bound), prunable=False)

    def dims(self):
        return {"in": self.in_features, "out": self.out_features}

    def __call__(self, x: Tensor) -> Tensor:
        return fc_forward(x, self)

    def output_shape(self, in_shape):
        return (self.out_features,)

    def flops(self, in_shape):
        return 2 * self.in_features * self.out_features


def fc_forward(x: Tensor, layer: FullyConnected) -> Tensor:
    """y = x . (W * mask) + b for x [batch, in]"""
    if x.ndim != 2 or x.shape[1] != layer.in_features:
        raise ShapeError(f"{layer.name}: expected input [batch, {layer.in_features}], got {list(x.shape)}")
    y = matmul(x, layer.registry.effective(layer.weight))
    return add(y, expand(layer.registry.effective(layer.bias), y.shape))


class SigmoidHead(FullyConnected):
    """Final FC to a single logit followed by a sigmoid"""

    kind = "sigmoid-head"

    def __init__(self, registry, name, in_features: int, rng: np.random.Generator):
        super().__init__(registry, name, in_features, 1, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return sigmoid(fc_forward(x, self))


class Conv2d(Layer):
    kind = "conv2d"
    layer_type = "conv"

    def __init__(
        self,
        registry,
        name,
        in_channels: int,
        out_channels: int,
        kernel: Tuple[int, int],
        rng: np.random.Generator,
        stride: Tuple[int, int] = (1, 1),
        padding: Tuple[int, int] = (0, 0),
        depthwise: bool = False,
    ):
        super().__init__(registry, name)
        if depthwise and in_channels != out_channels:
            raise ContractError(f"{name}: depthwise conv needs in == out channels")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = tuple(kernel)
        self.stride = tuple(stride)
        self.padding = tuple(padding)
        self.depthwise = depthwise
        fan_in = self.kernel[0] * self.kernel[1] * (1 if depthwise else in_channels)
        bound = 1.0 / np.sqrt(fan_in)
        shape = (out_channels, 1 if depthwise else in_channels) + self.kernel
        self.weight = self._register("weight", uniform_init(rng, shape, bound), prunable=True, scale=bound)
        self.bias = self._register("bias", uniform_init(rng, (out_channels,), bound), prunable=False)

    def dims(self):
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_h": self.kernel[0],
            "kernel_w": self.kernel[1],
        }

    def __call__(self, x: Tensor) -> Tensor:
        op = depthwise_conv2d if self.depthwise else conv2d
        y = op(x, self.registry.effective(self.weight), stride=self.stride, padding=self.padding)
        bias = reshape(self.registry.effective(self.bias), (self.out_channels, 1, 1))
        return add(y, expand(bias, y.shape))

    def output_shape(self, in_shape):
        _, height, width = in_shape
        out_h = (height + 2 * self.padding[0] - self.kernel[0]) // self.stride[0] + 1
        out_w = (width + 2 * self.padding[1] - self.kernel[1]) // self.stride[1] + 1
        return (self.out_channels, out_h, out_w)

    def flops(self, in_shape):
        _, out_h, out_w = self.output_shape(in_shape)
        c_in = 1 if self.depthwise else self.in_channels
        return 2 * self.kernel[0] * self.kernel[1] * c_in * self.out_channels * out_h * out_w


class Bottleneck(Layer):
    """
    Inverted residual block: 1x1 expand, 3x3 depthwise, 1x1 linear projection

    The expand conv is omitted when the expansion factor is 1. The residual
    add applies only when stride is 1 and channel counts match.
    """

    kind = "bottleneck"
    layer_type = "conv"

    def __init__(self, registry, name, in_channels: int, out_channels: int, expansion: int, stride: int, rng):
        super().__init__(registry, name)
        if stride not in (1, 2):
            raise ContractError(f"{name}: bottleneck stride must be 1 or 2, got {stride}")
        if expansion < 1:
            raise ContractError(f"{name}: expansion factor must be >= 1, got {expansion}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.expansion = expansion
        self.stride = stride
        hidden = in_channels * expansion
        self.hidden = hidden

        self.expand = None
        if expansion != 1:
            self.expand = Conv2d(registry, f"{name}.expand", in_channels, hidden, (1, 1), rng)
        self.depthwise = Conv2d(
            registry, f"{name}.depthwise", hidden, hidden, (3, 3), rng,
            stride=(stride, stride), padding=(1, 1), depthwise=True,
        )
        self.project = Conv2d(registry, f"{name}.project", hidden, out_channels, (1, 1), rng)
        self._param_names = [n for conv in self.convs for n in conv.param_names]

    @property
    def convs(self) -> List[Conv2d]:
        return [c for c in (self.expand, self.depthwise, self.project) if c is not None]

    @property
    def use_residual(self) -> bool:
        return self.stride == 1 and self.in_channels == self.out_channels

    def dims(self):
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "expansion": self.expansion,
            "stride": self.stride,
        }

    def __call__(self, x: Tensor) -> Tensor:
        return bottleneck_forward(x, self)

    def output_shape(self, in_shape):
        shape = in_shape
        for conv in self.convs:
            shape = conv.output_shape(shape)
        return shape

    def flops(self, in_shape):
        total, shape = 0, in_shape
        for conv in self.convs:
            total += conv.flops(shape)
            shape = conv.output_shape(shape)
        return total


def bottleneck_forward(x: Tensor, layer: Bottleneck) -> Tensor:
    if layer.stride not in (1, 2):
        raise ContractError(f"{layer.name}: bottleneck stride must be 1 or 2, got {layer.stride}")
    if x.ndim != 4 or x.shape[1] != layer.in_channels:
        raise ShapeError(f"{layer.name}: expected [batch, {layer.in_channels}, h, w], got {list(x.shape)}")
    h = x
    if layer.expand is not None:
        h = relu6(layer.expand(h))
    h = relu6(layer.depthwise(h))
    y = layer.project(h)
    if layer.use_residual:
        y = add(x, y)
    return y


class LSTM(Layer):
    """Unidirectional LSTM, gate order input/forget/candidate/output"""

    kind = "lstm"
    layer_type = "lstm"

    def __init__(self, registry, name, input_size: int, hidden_size: int, rng: np.random.Generator):
        super().__init__(registry, name)
        self.input_size = input_size
        self.hidden_size = hidden_size
        bound = 1.0 / np.sqrt(hidden_size)
        gates = 4 * hidden_size
        self.weight_ih = self._register(
            "weight_ih", uniform_init(rng, (input_size, gates), bound), prunable=True, scale=bound
        )
        self.weight_hh = self._register(
            "weight_hh", uniform_init(rng, (hidden_size, gates), bound), prunable=True, scale=bound
        )
        self.bias = self._register("bias", uniform_init(rng, (gates,), bound), prunable=False)

    def dims(self):
        return {"in": self.input_size, "hidden": self.hidden_size}

    def __call__(self, x: Tensor, state=None) -> Tensor:
        return lstm_forward(x, self, state=state)

    def output_shape(self, in_shape):
        return (in_shape[0], self.hidden_size)

    def flops(self, in_shape):
        steps = in_shape[0]
        return steps * 2 * 4 * self.hidden_size * (self.input_size + self.hidden_size)


def lstm_forward(
    x: Tensor,
    layer: LSTM,
    state: Optional[Tuple[Tensor, Tensor]] = None,
    return_state: bool = False,
):
    """
    Run the LSTM left to right over x [batch, time, in]

    Args:
        x: Input sequence
        layer: LSTM layer
        state: Optional (h0, c0), each [batch, hidden]; zeros when omitted
        return_state: Also return the final (h, c)

    Returns:
        Hidden states [batch, time, hidden] (and the final state when requested)
    """
    if x.ndim != 3:
        raise ShapeError(f"{layer.name}: expected [batch, time, {layer.input_size}], got {list(x.shape)}")
    batch, steps, width = x.shape
    if steps == 0:
        raise ContractError(f"{layer.name}: sequence length must be at least 1")
    if width != layer.input_size:
        raise ShapeError(f"{layer.name}: expected feature width {layer.input_size}, got {width}")

    hidden = layer.hidden_size
    w_ih = layer.registry.effective(layer.weight_ih)
    w_hh = layer.registry.effective(layer.weight_hh)
    bias = expand(layer.registry.effective(layer.bias), (batch, 4 * hidden))

    projected = reshape(matmul(reshape(x, (batch * steps, width)), w_ih), (batch, steps, 4 * hidden))

    if state is None:
        h = Tensor(np.zeros((batch, hidden)))
        c = Tensor(np.zeros((batch, hidden)))
    else:
        h, c = state

    outputs = []
    for t in range(steps):
        x_t = reshape(slice_axis(projected, 1, t, t + 1), (batch, 4 * hidden))
        gates = add(add(x_t, matmul(h, w_hh)), bias)
        i = sigmoid(slice_axis(gates, 1, 0, hidden))
        f = sigmoid(slice_axis(gates, 1, hidden, 2 * hidden))
        g = tanh(slice_axis(gates, 1, 2 * hidden, 3 * hidden))
        o = sigmoid(slice_axis(gates, 1, 3 * hidden, 4 * hidden))
        c = add(mul(f, c), mul(i, g))
        h = mul(o, tanh(c))
        outputs.append(reshape(h, (batch, 1, hidden)))

    sequence = outputs[0] if steps == 1 else concat(outputs, axis=1)
    if return_state:
        return sequence, (h, c)
    return sequence


class AvgPool(Layer):
    """Mean over the given tensor axes (batch axis is 0 and never pooled)"""

    kind = "avg-pool"

    def __init__(self, name: str, axes: Tuple[int, ...]):
        super().__init__(registry=None, name=name)
        if 0 in axes:
            raise ContractError(f"{name}: cannot pool over the batch axis")
        self.axes = tuple(axes)

    def param_count(self):
        return 0

    def pruned_count(self):
        return 0

    def __call__(self, x: Tensor) -> Tensor:
        if self.axes == (2, 3):
            return global_avg_pool(x)
        return avg_pool(x, axes=self.axes)

    def output_shape(self, in_shape):
        dropped = {axis - 1 for axis in self.axes}
        return tuple(d for i, d in enumerate(in_shape) if i not in dropped)


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel spatial mean of x [batch, ch, h, w] -> [batch, ch]"""
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool: expected [batch, ch, h, w], got {list(x.shape)}")
    return avg_pool(x, axes=(2, 3))
