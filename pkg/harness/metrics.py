"""
Scoring, FRR/FAR counting and threshold calibration
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np
import pandas as pd

from tensor_core.errors import CalibrationError, ContractError
from tensor_core.tensor import no_grad
from wws_models.loss import SCORE_CLAMP, decide
from wws_models.models import WWSModel

SCORE_COLUMNS = ["sample_id", "label", "snr_db", "score"]
EVAL_COLUMNS = ["stratum", "n_wake", "n_nonwake", "n_fr", "n_fa", "frr", "far"]


@dataclass
class EvalCounts:
    n_wake: int
    n_nonwake: int
    n_fr: int
    n_fa: int

    def __post_init__(self):
        if not 0 <= self.n_fr <= self.n_wake or not 0 <= self.n_fa <= self.n_nonwake:
            raise ContractError(f"Inconsistent counts: {self}")

    @property
    def frr(self) -> Optional[float]:
        return self.n_fr / self.n_wake if self.n_wake else None

    @property
    def far(self) -> Optional[float]:
        return self.n_fa / self.n_nonwake if self.n_nonwake else None


def score_dataset(model: WWSModel, dataset, batch_size: int = 64) -> pd.DataFrame:
    """Score every sample of a dataset without recording a graph"""
    rows = []
    labels = dataset.labels
    snr = dataset.snr
    with no_grad():
        for start in range(0, len(dataset), batch_size):
            indices = list(range(start, min(start + batch_size, len(dataset))))
            batch = dataset.batch(indices, audio=model.needs_audio, lips=model.needs_lips)
            scores = model.score(batch).numpy().reshape(-1)
            for i, score in zip(indices, scores):
                rows.append({"sample_id": i, "label": int(labels[i]), "snr_db": snr[i], "score": float(score)})
    return pd.DataFrame(rows, columns=SCORE_COLUMNS)


def count_errors(labels: np.ndarray, decisions: np.ndarray) -> EvalCounts:
    labels = np.asarray(labels, dtype=np.int64)
    decisions = np.asarray(decisions, dtype=np.int64)
    wake = labels == 1
    return EvalCounts(
        n_wake=int(wake.sum()),
        n_nonwake=int((~wake).sum()),
        n_fr=int((wake & (decisions == 0)).sum()),
        n_fa=int((~wake & (decisions == 1)).sum()),
    )


def evaluate_scores(scores: pd.DataFrame, threshold: float, strata: Optional[Iterable[str]] = None) -> pd.DataFrame:
    """
    FRR/FAR overall and per SNR stratum

    Args:
        scores: Output of score_dataset
        threshold: Decision threshold in (0, 1)
        strata: SNR labels to report; every label present in scores when None

    Returns:
        One row per stratum ("all" first); undefined rates are NaN
    """
    decisions = decide(scores["score"].to_numpy(), threshold)
    labels = scores["label"].to_numpy()
    snr = scores["snr_db"].astype(str).to_numpy()
    strata = list(strata) if strata is not None else sorted(set(snr), key=_stratum_order)

    rows = []
    for stratum in ["all"] + strata:
        keep = np.ones(len(scores), dtype=bool) if stratum == "all" else snr == stratum
        counts = count_errors(labels[keep], np.asarray(decisions)[keep])
        if stratum != "all" and (counts.n_wake == 0 or counts.n_nonwake == 0):
            print(f"   ⚠️  Stratum {stratum}: {counts.n_wake} wake / {counts.n_nonwake} non-wake samples; rate undefined")
        rows.append(
            {
                "stratum": stratum,
                "n_wake": counts.n_wake,
                "n_nonwake": counts.n_nonwake,
                "n_fr": counts.n_fr,
                "n_fa": counts.n_fa,
                "frr": np.nan if counts.frr is None else counts.frr,
                "far": np.nan if counts.far is None else counts.far,
            }
        )
    return pd.DataFrame(rows, columns=EVAL_COLUMNS)


def _stratum_order(label: str):
    return (1, 0.0) if label == "clean" else (0, float(label))


def threshold_for_target(positive_scores: Iterable[float], target: float) -> float:
    """
    Largest threshold whose 1 - FRR on the given positives is at least target

    That is the ceil(target * N)-th largest positive score.
    """
    scores = np.sort(np.asarray(list(positive_scores), dtype=np.float64))[::-1]
    if scores.size == 0:
        raise CalibrationError("Cannot calibrate a threshold without positive samples")
    if not 0.0 <= target <= 1.0:
        raise CalibrationError(f"Target 1 - FRR must be in [0, 1], got {target}")

    needed = math.ceil(target * scores.size - 1e-9)
    if needed == 0:
        return 1.0 - SCORE_CLAMP
    threshold = float(scores[needed - 1])
    if threshold <= 0.0:
        raise CalibrationError(
            f"Target 1 - FRR {target} is unreachable: {needed} positives must pass but the score is {threshold}"
        )
    return min(threshold, 1.0 - SCORE_CLAMP)


def calibrate_threshold(model: WWSModel, dev_dataset, target: float, batch_size: int = 64) -> float:
    scores = score_dataset(model, dev_dataset, batch_size)
    return threshold_for_target(scores.loc[scores["label"] == 1, "score"], target)


def far_summary(table: pd.DataFrame, prefix: str = "") -> Dict[str, float]:
    """Flatten an evaluate_scores table into {FRR, FAR, FAR_<snr>dB} columns"""
    summary = {}
    for _, row in table.iterrows():
        if row["stratum"] == "all":
            summary[f"{prefix}FRR"] = row["frr"]
            summary[f"{prefix}FAR"] = row["far"]
        else:
            suffix = "clean" if row["stratum"] == "clean" else f"{row['stratum']}dB"
            summary[f"{prefix}FAR_{suffix}"] = row["far"]
    return summary
