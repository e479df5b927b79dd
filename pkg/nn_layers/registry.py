"""
Named parameter registry with per-parameter binary masks
"""

from dataclasses import dataclass, field
from fnmatch import fnmatch
from typing import Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from tensor_core.errors import ContractError, ShapeError
from tensor_core.ops import mul
from tensor_core.tensor import Tensor


@dataclass
class LayerSpec:
    """Static description of one layer for naming and cost accounting"""

    kind: str
    name: str
    dims: Dict[str, int] = field(default_factory=dict)

    KINDS = ("fc", "conv2d", "bottleneck", "lstm", "avg-pool", "sigmoid-head")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ContractError(f"Unknown layer kind '{self.kind}'")
        for key, value in self.dims.items():
            if isinstance(value, int) and value <= 0:
                raise ContractError(f"Layer '{self.name}': dimension {key}={value} must be positive")


@dataclass
class ParamEntry:
    weight: Tensor
    mask: Optional[np.ndarray]
    layer_type: str
    prunable: bool
    frozen: bool = False
    scale: float = 1.0


Predicate = Union[str, Callable[[str], bool]]


def as_predicate(selector: Predicate) -> Callable[[str], bool]:
    """Turn 'all', a glob pattern or a callable into a name predicate"""
    if callable(selector):
        return selector
    if selector in ("all", "*"):
        return lambda name: True
    return lambda name: fnmatch(name, selector)


class ParamRegistry:
    """
    Registry of every trainable tensor in a model

    Prunable weights carry a dense 0/1 mask of the weight's shape; forward
    passes read `effective(name)`, which is weight * mask.
    """

    def __init__(self):
        self._entries: Dict[str, ParamEntry] = {}

    def add(self, name: str, value: np.ndarray, layer_type: str, prunable: bool, scale: float = 1.0) -> Tensor:
        if name in self._entries:
            raise ContractError(f"Parameter name '{name}' is already registered")
        weight = Tensor(value, requires_grad=True, name=name)
        mask = np.ones_like(weight.data) if prunable else None
        self._entries[name] = ParamEntry(
            weight=weight, mask=mask, layer_type=layer_type, prunable=prunable, scale=float(scale)
        )
        return weight

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __getitem__(self, name: str) -> ParamEntry:
        if name not in self._entries:
            raise KeyError(f"No parameter named '{name}'")
        return self._entries[name]

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> List[str]:
        return list(self._entries)

    def items(self) -> Iterator[Tuple[str, ParamEntry]]:
        return iter(self._entries.items())

    def effective(self, name: str) -> Tensor:
        entry = self[name]
        if entry.mask is None:
            return entry.weight
        return mul(entry.weight, Tensor._wrap(entry.mask))

    def trainable_tensors(self) -> Iterator[Tuple[str, Tensor]]:
        for name, entry in self._entries.items():
            if not entry.frozen:
                yield name, entry.weight

    def set_mask(self, name: str, mask: np.ndarray):
        entry = self[name]
        if not entry.prunable:
            raise ContractError(f"Parameter '{name}' is not prunable")
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != entry.weight.data.shape:
            raise ShapeError(f"Mask {list(mask.shape)} does not match weight '{name}' {list(entry.weight.shape)}")
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise ContractError(f"Mask for '{name}' must contain only 0 and 1")
        entry.mask = mask.copy()
        entry.weight.data *= entry.mask

    def masks(self) -> Dict[str, np.ndarray]:
        return {name: entry.mask.copy() for name, entry in self._entries.items() if entry.mask is not None}

    def apply_masks(self):
        """Zero every masked-out weight in place"""
        for entry in self._entries.values():
            if entry.mask is not None:
                entry.weight.data *= entry.mask

    def select(self, selector: Predicate, prunable_only: bool = True) -> List[str]:
        predicate = as_predicate(selector)
        return [
            name
            for name, entry in self._entries.items()
            if predicate(name) and (entry.prunable or not prunable_only)
        ]

    def freeze(self, selector: Predicate):
        """Stop gradient tracking and optimizer updates for matching parameters"""
        for name in self.select(selector, prunable_only=False):
            entry = self._entries[name]
            entry.frozen = True
            entry.weight.requires_grad = False
            entry.weight.zero_grad()

    def zero_grad(self):
        for entry in self._entries.values():
            entry.weight.zero_grad()

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: entry.weight.data.copy() for name, entry in self._entries.items()}

    def restore(self, weights: Dict[str, np.ndarray], keep_masks: bool = True):
        """Load weight values; surviving masks are re-applied when keep_masks"""
        for name, value in weights.items():
            entry = self[name]
            if value.shape != entry.weight.data.shape:
                raise ShapeError(f"Cannot restore '{name}': {list(value.shape)} vs {list(entry.weight.shape)}")
            entry.weight.data[...] = value
        if keep_masks:
            self.apply_masks()

    def parameter_count(self, selector: Predicate = "all") -> int:
        predicate = as_predicate(selector)
        return sum(entry.weight.size for name, entry in self._entries.items() if predicate(name))

    def pruned_count(self, selector: Predicate = "all") -> int:
        predicate = as_predicate(selector)
        return sum(
            int(entry.mask.size - np.count_nonzero(entry.mask))
            for name, entry in self._entries.items()
            if entry.mask is not None and predicate(name)
        )
