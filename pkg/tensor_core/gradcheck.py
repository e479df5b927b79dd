"""
Central finite-difference oracle for analytic gradients
"""

from typing import Callable, Dict, Mapping, Optional, Union

import numpy as np

from tensor_core.errors import ContractError, OracleError
from tensor_core.tensor import Tensor, backward, no_grad


def _scalar(value) -> float:
    if isinstance(value, Tensor):
        return value.item()
    return float(value)


def _leaf_map(params) -> Dict[str, Tensor]:
    """Accept a ParamRegistry or a plain name -> Tensor mapping"""
    if hasattr(params, "trainable_tensors"):
        return dict(params.trainable_tensors())
    if isinstance(params, Mapping):
        return dict(params)
    raise ContractError(f"finite_diff_check needs a registry or a name->Tensor mapping, got {type(params).__name__}")


def finite_diff_check(
    f: Callable[[object], Union[Tensor, float]],
    params,
    eps: float = 1e-5,
    max_entries: Optional[int] = None,
    seed: int = 0,
    floor: float = 1e-12,
) -> float:
    """
    Compare analytic gradients of f against central differences

    Args:
        f: Deterministic function of params returning a scalar
        params: ParamRegistry or mapping of name -> Tensor (leaves with requires_grad)
        eps: Central-difference step, in (0, 1e-2]
        max_entries: Check at most this many entries per parameter (sampled with seed)
        seed: Seed for entry sampling
        floor: Denominator floor of the relative error

    Returns:
        max |analytic - numeric| / max(|analytic|, |numeric|, floor) over checked entries
    """
    if not 0 < eps <= 1e-2:
        raise ContractError(f"eps must be in (0, 1e-2], got {eps}")

    leaves = _leaf_map(params)
    for leaf in leaves.values():
        leaf.zero_grad()

    loss = f(params)
    if not isinstance(loss, Tensor):
        raise ContractError("f must return a Tensor built from params for the analytic pass")
    base = loss.item()
    backward(loss)

    with no_grad():
        repeat = _scalar(f(params))
    if repeat != base:
        raise OracleError(f"f is not deterministic: {base!r} then {repeat!r} at identical parameters")

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, leaf in leaves.items():
        analytic = np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad
        flat = leaf.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = np.sort(rng.choice(flat.size, size=max_entries, replace=False))

        for index in indices:
            original = flat[index]
            with no_grad():
                flat[index] = original + eps
                upper = _scalar(f(params))
                flat[index] = original - eps
                lower = _scalar(f(params))
            flat[index] = original

            numeric = (upper - lower) / (2.0 * eps)
            exact = float(analytic.reshape(-1)[index])
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), floor)
            worst = max(worst, error)

    return worst
