"""
Binary cross-entropy training loss and the thresholded decision rule
"""

import numpy as np

from tensor_core.errors import ContractError, ShapeError
from tensor_core.ops import add, as_tensor, avg_pool, clamp, log, mul
from tensor_core.tensor import Tensor

SCORE_CLAMP = 1e-7


def wws_loss(scores, labels) -> Tensor:
    """
    Mean binary cross-entropy -y*log(p) - (1-y)*log(1-p)

    Args:
        scores: Sigmoid outputs, scalar or [batch]
        labels: Matching 0/1 labels

    Returns:
        Scalar loss tensor
    """
    scores = as_tensor(scores)
    y = np.asarray(labels, dtype=np.float64)
    if y.size != scores.size:
        raise ShapeError(f"Labels {list(y.shape)} do not match scores {list(scores.shape)}")
    y = y.reshape(scores.shape)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ContractError(f"Labels must be 0 or 1, got {np.unique(y).tolist()}")

    p = clamp(scores, SCORE_CLAMP, 1.0 - SCORE_CLAMP)
    positive = mul(Tensor(y), log(p))
    negative = mul(Tensor(1.0 - y), log(add(mul(p, -1.0), 1.0)))
    return mul(avg_pool(add(positive, negative)), -1.0)


def decide(score, threshold: float):
    """1 when score >= threshold, else 0 (vectorized over arrays)"""
    if not 0.0 < threshold < 1.0:
        raise ContractError(f"Threshold must lie in (0, 1), got {threshold}")
    decisions = (np.asarray(score, dtype=np.float64) >= threshold).astype(np.int64)
    return int(decisions) if decisions.ndim == 0 else decisions
