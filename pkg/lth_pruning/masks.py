"""
Unstructured magnitude masks and the geometric survivor schedule
"""

import math
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from nn_layers.registry import ParamRegistry, Predicate
from tensor_core.errors import ContractError

# keeps floor(s * N) exact when s was computed as k / N
COUNT_GUARD = 1e-9


@dataclass
class PruneScope:
    """Selects which prunable registry entries a pruning run may touch"""

    selector: Predicate = "all"
    label: str = "all"

    def names(self, registry: ParamRegistry) -> List[str]:
        names = registry.select(self.selector, prunable_only=True)
        if not names:
            raise ContractError(f"Pruning scope '{self.label}' selects no prunable parameters")
        return names

    def total(self, registry: ParamRegistry) -> int:
        return sum(registry[name].weight.size for name in self.names(registry))

    def pruned(self, registry: ParamRegistry) -> int:
        return sum(int(registry[n].mask.size - np.count_nonzero(registry[n].mask)) for n in self.names(registry))

    def sparsity(self, registry: ParamRegistry) -> float:
        return self.pruned(registry) / self.total(registry)


def target_count(sparsity: float, total: int) -> int:
    return int(math.floor(sparsity * total + COUNT_GUARD))


def scaled_magnitude(registry: ParamRegistry, name: str) -> np.ndarray:
    """|w| in units of the parameter's init bound, so every layer enters the global pool on one scale"""
    entry = registry[name]
    return np.abs(entry.weight.data.reshape(-1)) / entry.scale


def _extend(magnitudes: np.ndarray, mask: np.ndarray, extra: int) -> np.ndarray:
    """Zero the `extra` smallest surviving magnitudes; ties go to the lowest flat index"""
    mask = mask.copy()
    if extra <= 0:
        return mask
    survivors = np.flatnonzero(mask)
    order = np.argsort(magnitudes[survivors], kind="stable")
    mask[survivors[order[:extra]]] = 0.0
    return mask


def magnitude_mask(
    registry: ParamRegistry,
    scope: PruneScope,
    sparsity: float,
    per_layer: bool = False,
) -> Dict[str, np.ndarray]:
    """
    Extend the scope's masks until its pruned fraction reaches `sparsity`

    Args:
        registry: Model parameters and current masks
        scope: Which prunable parameters are ranked
        sparsity: Target pruned fraction in [current, 1)
        per_layer: Rank within each parameter instead of across the scope;
            the global pool ranks |w| divided by each parameter's init bound

    Returns:
        New mask per scoped parameter name; zeros already present stay zero
    """
    names = scope.names(registry)
    if not 0.0 <= sparsity < 1.0:
        raise ContractError(f"Target sparsity must be in [0, 1), got {sparsity}")
    current = scope.sparsity(registry)
    total = scope.total(registry)
    if target_count(sparsity, total) < scope.pruned(registry):
        raise ContractError(f"Target sparsity {sparsity:.6f} is below the current sparsity {current:.6f}")

    if per_layer:
        masks = {}
        for name in names:
            entry = registry[name]
            flat_mask = entry.mask.reshape(-1)
            extra = target_count(sparsity, flat_mask.size) - int(flat_mask.size - np.count_nonzero(flat_mask))
            masks[name] = _extend(np.abs(entry.weight.data.reshape(-1)), flat_mask, extra).reshape(entry.mask.shape)
        return masks

    magnitudes = np.concatenate([scaled_magnitude(registry, n) for n in names])
    pooled = np.concatenate([registry[n].mask.reshape(-1) for n in names])
    extra = target_count(sparsity, total) - int(pooled.size - np.count_nonzero(pooled))
    pooled = _extend(magnitudes, pooled, extra)

    masks, start = {}, 0
    for name in names:
        shape = registry[name].mask.shape
        size = registry[name].mask.size
        masks[name] = pooled[start : start + size].reshape(shape)
        start += size
    return masks


def apply_mask_set(registry: ParamRegistry, masks: Dict[str, np.ndarray]):
    for name, mask in masks.items():
        registry.set_mask(name, mask)


def survivor_schedule(total: int, rate: float, events: int) -> List[int]:
    """
    Surviving weight counts after each pruning event

    Each event removes floor(rate * survivors); entry 0 is the unpruned total.
    """
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"Per-iteration prune rate must be in [0, 1), got {rate}")
    survivors = [total]
    for _ in range(events):
        alive = survivors[-1]
        survivors.append(alive - int(math.floor(rate * alive + COUNT_GUARD)))
    return survivors


def schedule_sparsity(total: int, rate: float, events: int) -> float:
    return (total - survivor_schedule(total, rate, events)[-1]) / total
