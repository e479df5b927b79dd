"""
Pruned percentage per layer type
"""

from typing import Dict, Optional

import numpy as np
import pandas as pd

from nn_layers.registry import ParamRegistry

LAYER_TYPES = ("conv", "lstm", "fc")


def sparsity_report(registry: ParamRegistry) -> Dict[str, Optional[float]]:
    """
    Pruned % of prunable weights for conv, LSTM and FC layers and in total

    A layer type with no prunable weights reports None.
    """
    totals = {kind: 0 for kind in LAYER_TYPES}
    pruned = {kind: 0 for kind in LAYER_TYPES}
    for _, entry in registry.items():
        if not entry.prunable:
            continue
        totals[entry.layer_type] += entry.mask.size
        pruned[entry.layer_type] += int(entry.mask.size - np.count_nonzero(entry.mask))

    report = {
        kind: (100.0 * pruned[kind] / totals[kind] if totals[kind] else None) for kind in LAYER_TYPES
    }
    grand = sum(totals.values())
    report["total"] = 100.0 * sum(pruned.values()) / grand if grand else None
    return report


def sparsity_frame(registry: ParamRegistry, model_name: str = "") -> pd.DataFrame:
    row = {"model": model_name}
    row.update(sparsity_report(registry))
    return pd.DataFrame([row], columns=["model", *LAYER_TYPES, "total"])
