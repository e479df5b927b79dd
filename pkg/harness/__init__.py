from harness.config import ExperimentConfig, config_from_dict, load_config
from harness.metrics import (
    EVAL_COLUMNS,
    EvalCounts,
    calibrate_threshold,
    count_errors,
    evaluate_scores,
    far_summary,
    score_dataset,
    threshold_for_target,
)
from harness.report import build_report
