"""
Dense float64 tensors and the dynamic compute graph behind reverse-mode differentiation
"""

from contextlib import contextmanager
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from tensor_core.errors import ContractError, LifecycleError, NumericDomainError, ShapeError

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Suppress graph recording inside the block"""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def check_finite(array: np.ndarray, where: str):
    """Reject NaN/Inf at an op boundary"""
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NumericDomainError(f"{where}: {bad} non-finite value(s) in tensor of shape {list(array.shape)}")


class Tensor:
    """Row-major float64 tensor with optional gradient tracking"""

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        array = np.array(data, dtype=np.float64)
        if any(dim <= 0 for dim in array.shape):
            raise ShapeError(f"Tensor dimensions must be positive, got shape {list(array.shape)}")
        check_finite(array, "Tensor")

        self.data = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._node: Optional["OpNode"] = None

    @classmethod
    def _wrap(cls, array: np.ndarray) -> "Tensor":
        """Build a tensor around an op output without copying"""
        out = cls.__new__(cls)
        out.data = array
        out.grad = None
        out.requires_grad = False
        out.name = None
        out._node = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {list(self.shape)}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={list(self.shape)}{label}{flag})"

    # operator sugar over the primitive table

    def __add__(self, other):
        from tensor_core.ops import add
        return add(self, other)

    def __radd__(self, other):
        from tensor_core.ops import add
        return add(other, self)

    def __mul__(self, other):
        from tensor_core.ops import mul
        return mul(self, other)

    def __rmul__(self, other):
        from tensor_core.ops import mul
        return mul(other, self)

    def __neg__(self):
        from tensor_core.ops import mul
        return mul(self, -1.0)

    def __sub__(self, other):
        from tensor_core.ops import add, mul
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        from tensor_core.ops import add, mul
        return add(other, mul(self, -1.0))

    def __matmul__(self, other):
        from tensor_core.ops import matmul
        return matmul(self, other)


class OpNode:
    """One recorded primitive application"""

    def __init__(
        self,
        kind: str,
        inputs: Sequence[Tensor],
        output: Tensor,
        backward_fn: Callable[[np.ndarray], List[Optional[np.ndarray]]],
    ):
        self.kind = kind
        self.inputs = list(inputs)
        self.output_id = id(output)
        self.backward_fn = backward_fn
        self.consumed = False

    def release(self):
        """Drop saved activations once backward has used them"""
        self.consumed = True
        self.backward_fn = None
        self.inputs = []


def record(kind: str, inputs: Sequence[Tensor], output: Tensor, backward_fn) -> Tensor:
    """Attach an op record to output when any input tracks gradients"""
    if _GRAD_ENABLED and any(t.requires_grad for t in inputs):
        output.requires_grad = True
        output._node = OpNode(kind, inputs, output, backward_fn)
    return output


class ComputeGraph:
    """Topologically ordered op records reachable from one output"""

    def __init__(self, output: Tensor):
        self.output = output
        self.nodes: List[Tuple[Tensor, OpNode]] = []
        self._build()

    def _build(self):
        if self.output._node is not None and self.output._node.consumed:
            raise LifecycleError("backward() called twice on the same graph; run the forward pass again")

        visited = set()
        order: List[Tensor] = []
        stack = [(self.output, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            node = tensor._node
            if node is None:
                continue
            if node.consumed:
                raise LifecycleError(f"graph node '{node.kind}' was already consumed by an earlier backward()")
            for parent in node.inputs:
                if id(parent) not in visited:
                    stack.append((parent, False))

        self.nodes = [(t, t._node) for t in order if t._node is not None]

    def run(self):
        """Propagate gradients from the output back to every requires_grad leaf"""
        grads: Dict[int, np.ndarray] = {id(self.output): np.ones_like(self.output.data)}
        leaves: Dict[int, Tensor] = {}

        for tensor, node in reversed(self.nodes):
            upstream = grads.pop(id(tensor), None)
            if upstream is None:
                continue
            input_grads = node.backward_fn(upstream)
            for parent, grad in zip(node.inputs, input_grads):
                if grad is None or not parent.requires_grad:
                    continue
                if grad.shape != parent.data.shape:
                    raise ShapeError(
                        f"{node.kind} backward produced gradient {list(grad.shape)} for input {list(parent.shape)}"
                    )
                if parent._node is None:
                    leaves[id(parent)] = parent
                    parent.grad = grad.copy() if parent.grad is None else parent.grad + grad
                elif id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + grad
                else:
                    grads[id(parent)] = grad

        if self.output._node is None and self.output.requires_grad:
            leaves[id(self.output)] = self.output
            self.output.grad = np.ones_like(self.output.data) if self.output.grad is None else self.output.grad + 1.0

        for _, node in self.nodes:
            node.release()

        return list(leaves.values())


def backward(loss: Tensor) -> Dict[str, Tensor]:
    """
    Run reverse-mode differentiation from a scalar loss

    Args:
        loss: Scalar tensor produced by a recorded forward pass

    Returns:
        Mapping of leaf name to its gradient for every named leaf reached
    """
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {list(loss.shape)}")

    graph = ComputeGraph(loss)
    leaves = graph.run()

    return {leaf.name: Tensor._wrap(leaf.grad.copy()) for leaf in leaves if leaf.name is not None}
