from lth_pruning.lth import (
    ENCODER_SCOPE,
    FUSION_SCOPE,
    REGIMES,
    PruneState,
    global_sparsity,
    lth_if_run,
    lth_oneshot_run,
    run_regime,
    sequential_av_prune,
)
from lth_pruning.masks import PruneScope, apply_mask_set, magnitude_mask, schedule_sparsity, survivor_schedule
from lth_pruning.report import sparsity_frame, sparsity_report
