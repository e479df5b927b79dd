"""
Parameter and FLOPs accounting

Convention: one multiply-accumulate counts as 2 FLOPs. Pooling, activations,
residual adds and gate nonlinearities are not counted.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import pandas as pd

from nn_layers.layers import Layer
from tensor_core.errors import ContractError

FLOPS_CONVENTION = "1 multiply-accumulate = 2 FLOPs; activations and pooling excluded"

COST_COLUMNS = ["layer", "kind", "params", "pruned", "flops"]


@dataclass
class LayerCost:
    layer: str
    kind: str
    params: int
    pruned: int
    flops: int


@dataclass
class CostReport:
    """Per-layer and total cost of one forward pass at a stated input shape"""

    input_shape: Tuple[int, ...]
    rows: List[LayerCost] = field(default_factory=list)

    @property
    def total_params(self) -> int:
        return sum(row.params for row in self.rows)

    @property
    def total_pruned(self) -> int:
        return sum(row.pruned for row in self.rows)

    @property
    def total_flops(self) -> int:
        return sum(row.flops for row in self.rows)

    @property
    def pruned_fraction(self) -> float:
        return self.total_pruned / self.total_params if self.total_params else 0.0

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame([vars(row) for row in self.rows], columns=COST_COLUMNS)
        total = pd.DataFrame(
            [{
                "layer": "TOTAL",
                "kind": "",
                "params": self.total_params,
                "pruned": self.total_pruned,
                "flops": self.total_flops,
            }]
        )
        df = pd.concat([df, total], ignore_index=True)
        return df.astype({"params": "int64", "pruned": "int64", "flops": "int64"})

    def to_csv(self, path: Path):
        path = Path(path)
        shape = "x".join(str(d) for d in self.input_shape)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(f"# FLOPs convention: {FLOPS_CONVENTION}; input shape {shape}\n")
            self.to_frame().to_csv(handle, index=False, lineterminator="\n")


def count_params_flops(model, input_shape: Optional[Sequence[int]] = None) -> CostReport:
    """
    Count parameters, pruned entries and per-sample FLOPs

    Args:
        model: A model exposing cost_plan(), or a single Layer
        input_shape: Per-sample input shape (required for a single Layer)

    Returns:
        CostReport with one row per layer
    """
    if isinstance(model, Layer):
        if input_shape is None:
            raise ContractError("input_shape is required when costing a single layer")
        plan = [(model, tuple(input_shape), 1)]
        shape = tuple(input_shape)
    else:
        plan = model.cost_plan()
        shape = tuple(input_shape) if input_shape is not None else tuple(model.input_shape)

    report = CostReport(input_shape=shape)
    for layer, in_shape, repeat in plan:
        spec = layer.spec
        report.rows.append(
            LayerCost(
                layer=spec.name,
                kind=spec.kind,
                params=int(layer.param_count()),
                pruned=int(layer.pruned_count()),
                flops=int(layer.flops(in_shape)) * int(repeat),
            )
        )
    return report
