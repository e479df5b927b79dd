"""
Experiment runners behind the CLI: synth, train, prune, eval, calibrate, flops, pipeline

Every runner writes into one run directory:
    run.json, checkpoint.wws, train_log.csv, history.csv, eval.csv,
    scores.csv, calibration.json, sparsity.csv, cost.csv
"""

import json
import os
import shutil
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from features.fbank import FbankStats
from harness.config import ExperimentConfig
from harness.metrics import calibrate_threshold, evaluate_scores, far_summary, score_dataset, threshold_for_target
from harness.report import build_report
from lth_pruning.lth import global_sparsity, lth_oneshot_run, run_regime
from lth_pruning.masks import PruneScope, schedule_sparsity
from lth_pruning.report import sparsity_frame
from nn_layers.cost import count_params_flops
from synth_corpus.corpus import STATS_FILE, CorpusDataset, build_corpus, load_fbank_stats
from synth_corpus.generator import parse_snr, snr_label
from tensor_core.errors import ArtifactExistsError, CalibrationError
from wws_models.checkpoint import load_checkpoint, save_checkpoint
from wws_models.models import EncoderCostView, WWSModel, build_model
from wws_models.optim import Adam
from wws_models.trainer import Trainer

CHECKPOINT = "checkpoint.wws"


def banner(title: str):
    print("=" * 60)
    print(title)
    print("=" * 60)


def prepare_run_dir(out_dir: Path, overwrite: bool = False) -> Path:
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        if not overwrite:
            raise ArtifactExistsError(f"{out_dir} already exists; pass --overwrite to replace it")
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def write_json(path: Path, payload: dict):
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_csv(df: pd.DataFrame, path: Path):
    df.to_csv(path, index=False, lineterminator="\n")


def stats_payload(stats: FbankStats) -> dict:
    return {"mean": stats.mean.tolist(), "std": stats.std.tolist()}


def stats_from_payload(payload: dict) -> FbankStats:
    return FbankStats(mean=np.asarray(payload["mean"]), std=np.asarray(payload["std"]))


def load_split(config: ExperimentConfig, split: str, stats: Optional[FbankStats] = None) -> CorpusDataset:
    return CorpusDataset(config.corpus.path, split, stats=stats, fbank=config.features.settings())


def eval_strata(config: ExperimentConfig):
    """Evaluation SNR grid in the labels the corpus writes ("-5", "0", "clean")"""
    return [snr_label(parse_snr(v)) for v in config.corpus.eval_snrs]


def trainer_factory(config: ExperimentConfig, verbose: bool = True) -> Callable[[WWSModel], Trainer]:
    def make(model: WWSModel) -> Trainer:
        optimizer = Adam(
            model.registry, config.lr, betas=(config.optimizer.beta1, config.optimizer.beta2), eps=config.optimizer.eps
        )
        return Trainer(model, optimizer, config.batch_size, seed=config.seed, verbose=verbose)

    return make


def dev_evaluator(config: ExperimentConfig, dev: CorpusDataset):
    """History callback: dev FRR/FAR per SNR at a dev-calibrated (or fixed) threshold"""

    def evaluate_dev(model: WWSModel) -> Dict[str, float]:
        scores = score_dataset(model, dev, config.batch_size)
        try:
            threshold = pick_threshold(config, scores)
        except CalibrationError as e:
            print(f"   ⚠️  {e}; using threshold {config.threshold.value}")
            threshold = config.threshold.value
        table = evaluate_scores(scores, threshold, strata=eval_strata(config))
        return {"threshold": threshold, **far_summary(table, prefix="dev_")}

    return evaluate_dev


def pick_threshold(config: ExperimentConfig, dev_scores: pd.DataFrame) -> float:
    if config.threshold.policy == "fixed":
        return config.threshold.value
    positives = dev_scores.loc[dev_scores["label"] == 1, "score"]
    return threshold_for_target(positives, config.threshold.target)


def checkpoint_metadata(config: ExperimentConfig, stats: FbankStats, kind: str, run_dir: Path) -> dict:
    """Run metadata for the checkpoint header; the corpus path is stored relative to run_dir"""
    payload = config.to_dict()
    corpus = Path(config.corpus.path).resolve()
    payload["corpus"]["path"] = Path(os.path.relpath(corpus, Path(run_dir).resolve())).as_posix()
    return {"kind": kind, "fbank_stats": stats_payload(stats), "config": payload}


def write_model_artifacts(run_dir: Path, model: WWSModel, config: ExperimentConfig, stats: FbankStats, kind: str):
    save_checkpoint(run_dir / CHECKPOINT, model, checkpoint_metadata(config, stats, kind, run_dir))
    count_params_flops(model).to_csv(run_dir / "cost.csv")
    write_csv(sparsity_frame(model.registry, model.modality), run_dir / "sparsity.csv")


# ---------------- synth ----------------

def run_synth(config: ExperimentConfig, out_dir: Optional[Path] = None, overwrite: bool = False):
    root = Path(out_dir) if out_dir is not None else Path(config.corpus.path)
    return build_corpus(config.corpus.settings(), root, overwrite=overwrite, fbank=config.features.settings())


# ---------------- train ----------------

def run_train(config: ExperimentConfig, out_dir: Path, overwrite: bool = False) -> WWSModel:
    run_dir = prepare_run_dir(out_dir, overwrite)
    banner(f"🏋️  TRAINING {config.modality.upper()} MODEL")
    stats = load_fbank_stats(Path(config.corpus.path) / STATS_FILE)
    train = load_split(config, "train", stats)

    model = build_model(config.modality, config.topology, seed=config.seed)
    trainer = trainer_factory(config)(model)
    print(f"📊 {len(train)} training samples, lr={config.lr}, batch={config.batch_size}")
    trainer.train(train, config.optimizer.epochs)

    write_csv(trainer.log_frame(), run_dir / "train_log.csv")
    write_model_artifacts(run_dir, model, config, stats, kind="train")
    write_json(run_dir / "run.json", {
        "name": run_dir.name,
        "kind": "train",
        "modality": config.modality,
        "seed": config.seed,
        "epochs": config.optimizer.epochs,
    })
    print(f"✅ Checkpoint written to {run_dir / CHECKPOINT}")
    return model


# ---------------- eval / calibrate ----------------

def _load_for_eval(config: ExperimentConfig, checkpoint: Path) -> Tuple[WWSModel, FbankStats]:
    model, metadata = load_checkpoint(checkpoint)
    return model, stats_from_payload(metadata["fbank_stats"])


def run_calibrate(config: ExperimentConfig, checkpoint: Path, out_dir: Optional[Path] = None) -> float:
    model, stats = _load_for_eval(config, checkpoint)
    threshold = calibrate_threshold(model, load_split(config, "dev", stats), config.threshold.target, config.batch_size)
    print(f"🎯 Threshold {threshold:.6f} gives dev 1-FRR >= {config.threshold.target}")
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_json(Path(out_dir) / "calibration.json", {"target": config.threshold.target, "threshold": threshold})
    return threshold


def run_eval(config: ExperimentConfig, checkpoint: Path, out_dir: Path, threshold: Optional[float] = None) -> pd.DataFrame:
    """Pick the threshold on dev (unless given), then evaluate on test"""
    banner("🧪 EVALUATION")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, stats = _load_for_eval(config, checkpoint)
    dev = load_split(config, "dev", stats)
    test = load_split(config, "test", stats)

    if threshold is None:
        threshold = pick_threshold(config, score_dataset(model, dev, config.batch_size))
    write_json(out_dir / "calibration.json", {
        "policy": config.threshold.policy,
        "target": config.threshold.target,
        "threshold": threshold,
    })

    scores = score_dataset(model, test, config.batch_size)
    table = evaluate_scores(scores, threshold, strata=eval_strata(config))
    table.insert(0, "threshold", threshold)
    write_csv(scores, out_dir / "scores.csv")
    write_csv(table, out_dir / "eval.csv")
    overall = table.iloc[0]
    print(f"   ✅ test FRR {overall['frr']:.4f}  FAR {overall['far']:.4f} at threshold {threshold:.6f}")
    return table


# ---------------- prune ----------------

def run_prune(config: ExperimentConfig, out_dir: Path, overwrite: bool = False) -> WWSModel:
    """LTH-IF (or the configured audio-visual regime) from a fresh initialization"""
    run_dir = prepare_run_dir(out_dir, overwrite)
    pruning = config.pruning
    banner(f"✂️  PRUNING {config.modality.upper()} MODEL ({pruning.regime if config.modality == 'av' else 'lth-if'})")
    stats = load_fbank_stats(Path(config.corpus.path) / STATS_FILE)
    train = load_split(config, "train", stats)
    dev = load_split(config, "dev", stats)

    model = build_model(config.modality, config.topology, seed=config.seed)
    states = run_regime(
        pruning.regime, model, train, trainer_factory(config),
        T=pruning.T, p=pruning.p, E=config.optimizer.epochs,
        encoder_T=pruning.encoder_T, encoder_p=pruning.encoder_p,
        evaluator=dev_evaluator(config, dev), per_layer=pruning.per_layer,
        scope=PruneScope(pruning.scope, label=pruning.scope),
    )
    history = pd.concat([state.history_frame() for state in states], ignore_index=True)
    history.insert(0, "step", np.arange(1, len(history) + 1))
    write_csv(history, run_dir / "history.csv")
    write_model_artifacts(run_dir, model, config, stats, kind="lth-if")
    write_json(run_dir / "run.json", {
        "name": run_dir.name,
        "kind": "lth-if",
        "modality": config.modality,
        "regime": pruning.regime if config.modality == "av" else "lth-if",
        "seed": config.seed,
        "T": pruning.T,
        "p": pruning.p,
        "global_sparsity": global_sparsity(model.registry),
    })
    print(f"✅ Pruned to {100 * global_sparsity(model.registry):.2f}% of prunable weights")
    return model


def oneshot_target(config: ExperimentConfig, model: WWSModel) -> float:
    if config.pruning.oneshot_sparsity is not None:
        return config.pruning.oneshot_sparsity
    scope = PruneScope(config.pruning.scope, label=config.pruning.scope)
    return schedule_sparsity(scope.total(model.registry), config.pruning.p, config.pruning.T - 1)


def run_oneshot(config: ExperimentConfig, out_dir: Path, overwrite: bool = False) -> WWSModel:
    """One-shot lottery ticket baseline at the configured (or LTH-IF-matched) sparsity"""
    run_dir = prepare_run_dir(out_dir, overwrite)
    banner(f"✂️  ONE-SHOT LTH {config.modality.upper()} MODEL")
    stats = load_fbank_stats(Path(config.corpus.path) / STATS_FILE)
    train = load_split(config, "train", stats)
    dev = load_split(config, "dev", stats)

    model = build_model(config.modality, config.topology, seed=config.seed)
    target = oneshot_target(config, model)
    state = lth_oneshot_run(
        model, train, trainer_factory(config), target, E=config.optimizer.epochs,
        scope=PruneScope(config.pruning.scope, label=config.pruning.scope),
        evaluator=dev_evaluator(config, dev), per_layer=config.pruning.per_layer,
    )
    history = state.history_frame()
    history.insert(0, "step", np.arange(1, len(history) + 1))
    write_csv(history, run_dir / "history.csv")
    write_model_artifacts(run_dir, model, config, stats, kind="oneshot")
    write_json(run_dir / "run.json", {
        "name": run_dir.name,
        "kind": "oneshot",
        "modality": config.modality,
        "seed": config.seed,
        "target_sparsity": target,
        "global_sparsity": global_sparsity(model.registry),
    })
    return model


# ---------------- flops ----------------

def run_flops(config: ExperimentConfig, out_dir: Path) -> pd.DataFrame:
    """Parameter/FLOPs table for the audio, lip encoder, video and audio-visual networks"""
    banner("🧮 PARAMETERS AND FLOPS")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    audio = build_model("audio", config.topology, seed=config.seed)
    video = build_model("video", config.topology, seed=config.seed)
    av = build_model("av", config.topology, seed=config.seed)
    networks = {
        "audio": audio,
        "lip_encoder": EncoderCostView(video.encoder, config.topology.video_frames),
        "video": video,
        "av": av,
    }

    rows = []
    for name, network in networks.items():
        report = count_params_flops(network)
        report.to_csv(out_dir / f"cost_{name}.csv")
        rows.append({
            "network": name,
            "params": report.total_params,
            "flops": report.total_flops,
            "params_M": report.total_params / 1e6,
            "flops_M": report.total_flops / 1e6,
        })
        print(f"   ✅ {name}: {report.total_params:,} params, {report.total_flops:,} FLOPs")
    table = pd.DataFrame(rows, columns=["network", "params", "flops", "params_M", "flops_M"])
    write_csv(table, out_dir / "cost_table.csv")
    return table


# ---------------- pipeline ----------------

def run_pipeline(config: ExperimentConfig, out_dir: Path, overwrite: bool = False):
    """synth -> train x3 -> eval -> prune (LTH-IF, one-shot, AV regime) -> eval -> flops -> report"""
    out_dir = prepare_run_dir(out_dir, overwrite)
    runs = out_dir / "runs"
    config.corpus.path = str(out_dir / "corpus")
    run_synth(config)

    for modality in ("audio", "video", "av"):
        cfg = config.for_modality(modality)
        run_train(cfg, runs / f"train_{modality}")
        run_eval(cfg, runs / f"train_{modality}" / CHECKPOINT, runs / f"train_{modality}")

    plan = [("audio", run_prune, "prune_audio"), ("audio", run_oneshot, "oneshot_audio"),
            ("video", run_prune, "prune_video"), ("av", run_prune, "prune_av")]
    for modality, runner, name in plan:
        cfg = config.for_modality(modality)
        runner(cfg, runs / name)
        run_eval(cfg, runs / name / CHECKPOINT, runs / name)

    run_flops(config, out_dir / "flops")
    return build_report(runs, out_dir / "report")
