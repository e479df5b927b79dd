"""
Lottery-ticket pruning drivers

- lth_if_run: iterative magnitude pruning with one fine-tuning epoch per iteration
- lth_oneshot_run: train, mask once, rewind to the initial weights, retrain
- sequential_av_prune: lip encoder first, then the fusion back end with the encoder fixed
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from lth_pruning.masks import PruneScope, apply_mask_set, magnitude_mask, survivor_schedule
from nn_layers.registry import ParamRegistry
from tensor_core.errors import ContractError
from wws_models.models import WWSModel
from wws_models.trainer import Trainer

TrainerFactory = Callable[[WWSModel], Trainer]
Evaluator = Callable[[WWSModel], Dict[str, float]]

ENCODER_SCOPE = PruneScope("lip_encoder.*", label="lip_encoder")
FUSION_SCOPE = PruneScope("fusion.*", label="fusion")
REGIMES = ("sequential", "joint", "encoder-only")


@dataclass
class PruneState:
    """Progress of one pruning run; history holds one row per iteration"""

    T: int
    E: int
    p: float
    scope: PruneScope
    t: int = 0
    masks: Dict[str, np.ndarray] = field(default_factory=dict)
    history: List[dict] = field(default_factory=list)

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.history)


def global_sparsity(registry: ParamRegistry) -> float:
    total = sum(entry.weight.size for _, entry in registry.items() if entry.prunable)
    return registry.pruned_count() / total if total else 0.0


def _history_row(state: PruneState, model: WWSModel, phase: str, epochs: int, train_loss: float,
                 evaluator: Optional[Evaluator]) -> dict:
    row = {
        "phase": phase,
        "t": state.t,
        "epochs": epochs,
        "scoped_sparsity": state.scope.sparsity(model.registry),
        "global_sparsity": global_sparsity(model.registry),
        "train_loss": train_loss,
    }
    if evaluator is not None:
        row.update(evaluator(model))
    return row


def lth_if_run(
    model: WWSModel,
    train_data,
    trainer: Trainer,
    T: int,
    p: float,
    E: int = 5,
    scope: Optional[PruneScope] = None,
    evaluator: Optional[Evaluator] = None,
    per_layer: bool = False,
    phase: str = "lth-if",
) -> PruneState:
    """
    Iterative magnitude pruning with fine-tuning

    Iteration 1 trains E epochs, every later iteration trains exactly one.
    After each iteration t < T the scope's masks are extended so that the
    surviving count follows the floor-rounded geometric schedule; surviving
    weights carry over (no rewind) and the optimizer state persists.

    Args:
        model: Freshly initialized model
        train_data: Dataset with len() and batch()
        trainer: Trainer bound to model (its Adam state is reused across iterations)
        T: Total iterations, at least 2
        p: Fraction of surviving scoped weights removed per pruning event
        E: Epochs in the first iteration
        scope: Parameters eligible for pruning
        evaluator: Optional dev-set metrics callback, merged into each history row
        per_layer: Rank magnitudes within each parameter instead of globally
        phase: Label written to the history rows

    Returns:
        PruneState with final masks and one history row per iteration
    """
    if T < 2:
        raise ContractError(f"LTH-IF needs at least 2 iterations, got T={T}")
    scope = scope or PruneScope()
    if trainer.model is not model:
        raise ContractError("Trainer is bound to a different model")

    registry = model.registry
    state = PruneState(T=T, E=E, p=p, scope=scope)
    survivors = survivor_schedule(scope.total(registry), p, T - 1)
    base_pruned = scope.pruned(registry)
    print(f"\n✂️  {phase}: T={T}, E={E}, p={p}, scope={scope.label} ({scope.total(registry)} weights)")

    for t in range(1, T + 1):
        state.t = t
        epochs = E if t == 1 else 1
        records = trainer.train(train_data, epochs, iteration=t)
        train_loss = records[-1].mean_loss if records else float("nan")
        state.history.append(_history_row(state, model, phase, epochs, train_loss, evaluator))

        if t < T:
            total = scope.total(registry)
            target = max(total - survivors[t], base_pruned) / total
            masks = magnitude_mask(registry, scope, target, per_layer=per_layer)
            apply_mask_set(registry, masks)
            trainer.optimizer.sync_masks()
            print(f"   ✂️  t={t}: scoped sparsity {scope.sparsity(registry):.4f}")

    state.masks = {name: registry[name].mask.copy() for name in scope.names(registry)}
    return state


def lth_oneshot_run(
    model: WWSModel,
    train_data,
    make_trainer: TrainerFactory,
    sparsity: float,
    E: int = 5,
    scope: Optional[PruneScope] = None,
    evaluator: Optional[Evaluator] = None,
    per_layer: bool = False,
) -> PruneState:
    """
    One-shot lottery ticket baseline

    Train E epochs, mask once to `sparsity`, rewind surviving weights to their
    initial values and retrain E epochs with a fresh optimizer.
    """
    scope = scope or PruneScope()
    registry = model.registry
    initial = registry.snapshot()
    state = PruneState(T=1, E=E, p=sparsity, scope=scope)
    print(f"\n✂️  one-shot LTH: target sparsity {sparsity}, scope={scope.label}")

    dense = make_trainer(model).train(train_data, E, iteration=1)
    state.t = 1
    state.history.append(_history_row(state, model, "dense", E, dense[-1].mean_loss if dense else float("nan"), None))

    apply_mask_set(registry, magnitude_mask(registry, scope, sparsity, per_layer=per_layer))
    registry.restore(initial, keep_masks=True)

    retrained = make_trainer(model).train(train_data, E, iteration=2)
    state.t = 2
    state.history.append(
        _history_row(state, model, "retrain", E, retrained[-1].mean_loss if retrained else float("nan"), evaluator)
    )
    state.masks = {name: registry[name].mask.copy() for name in scope.names(registry)}
    return state


def encoder_bytes(registry: ParamRegistry) -> Dict[str, bytes]:
    """Weight and mask bytes of every lip encoder parameter"""
    out = {}
    for name in registry.select("lip_encoder.*", prunable_only=False):
        entry = registry[name]
        out[name] = entry.weight.data.tobytes() + (entry.mask.tobytes() if entry.mask is not None else b"")
    return out


def sequential_av_prune(
    model: WWSModel,
    train_data,
    make_trainer: TrainerFactory,
    encoder_T: int,
    encoder_p: float,
    backend_T: int,
    backend_p: float,
    E: int = 5,
    evaluator: Optional[Evaluator] = None,
    per_layer: bool = False,
) -> List[PruneState]:
    """
    Prune the lip encoder with LTH-IF, then fix it and prune the fusion back end

    Phase 2 freezes encoder weights and masks; their bytes are checked to be
    unchanged when the phase finishes.
    """
    if model.modality != "av":
        raise ContractError(f"Sequential pruning needs an audio-visual model, got '{model.modality}'")

    encoder_state = lth_if_run(
        model, train_data, make_trainer(model), encoder_T, encoder_p, E=E,
        scope=ENCODER_SCOPE, evaluator=evaluator, per_layer=per_layer, phase="encoder",
    )

    model.registry.freeze("lip_encoder.*")
    before = encoder_bytes(model.registry)
    backend_state = lth_if_run(
        model, train_data, make_trainer(model), backend_T, backend_p, E=E,
        scope=FUSION_SCOPE, evaluator=evaluator, per_layer=per_layer, phase="fusion",
    )
    if encoder_bytes(model.registry) != before:
        raise ContractError("Lip encoder parameters changed while it was frozen")
    return [encoder_state, backend_state]


def run_regime(
    regime: str,
    model: WWSModel,
    train_data,
    make_trainer: TrainerFactory,
    T: int,
    p: float,
    E: int = 5,
    encoder_T: Optional[int] = None,
    encoder_p: Optional[float] = None,
    evaluator: Optional[Evaluator] = None,
    per_layer: bool = False,
    scope: Optional[PruneScope] = None,
) -> List[PruneState]:
    """Dispatch an audio-visual pruning regime; other modalities always prune jointly"""
    if regime not in REGIMES:
        raise ContractError(f"Unknown pruning regime '{regime}'; expected one of {REGIMES}")
    encoder_T = encoder_T or T
    encoder_p = p if encoder_p is None else encoder_p

    if model.modality != "av" or regime == "joint":
        return [lth_if_run(model, train_data, make_trainer(model), T, p, E=E,
                           scope=scope, evaluator=evaluator, per_layer=per_layer,
                           phase="joint" if model.modality == "av" else "lth-if")]
    if regime == "encoder-only":
        return [lth_if_run(model, train_data, make_trainer(model), encoder_T, encoder_p, E=E,
                           scope=ENCODER_SCOPE, evaluator=evaluator, per_layer=per_layer, phase="encoder")]
    return sequential_av_prune(model, train_data, make_trainer, encoder_T, encoder_p, T, p,
                               E=E, evaluator=evaluator, per_layer=per_layer)
