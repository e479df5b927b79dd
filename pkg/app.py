"""
Audio-visual wake word spotting with iterative fine-tuned pruning - command line entry point

Usage:
    python app.py synth --config cfg.json
    python app.py train --config cfg.json --modality audio --out runs/train_audio
    python app.py prune --config cfg.json --modality av --out runs/prune_av
    python app.py eval --config cfg.json --checkpoint runs/prune_av/checkpoint.wws --out runs/prune_av
    python app.py report --out runs/report runs/
    python app.py pipeline --config cfg.json --out runs/
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from harness.config import load_config
from harness.experiments import (
    run_calibrate,
    run_eval,
    run_flops,
    run_oneshot,
    run_pipeline,
    run_prune,
    run_synth,
    run_train,
)
from harness.report import build_report
from tensor_core.errors import CalibrationError, ConfigError, NumericDivergenceError, WWSError
from wws_models.models import MODALITIES

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_CALIBRATION = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wws", description="Audio-visual wake word spotting and LTH-IF pruning")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_required: bool = True):
        p.add_argument("--config", type=Path, default=None, help="JSON experiment config (defaults if omitted)")
        p.add_argument("--seed", type=int, default=None, help="Override config.seed")
        p.add_argument("--out", type=Path, required=out_required, default=None, help="Output directory")
        p.add_argument("--overwrite", action="store_true", help="Replace existing outputs")

    def modality(p: argparse.ArgumentParser):
        p.add_argument("--modality", choices=MODALITIES, default=None, help="Override config.modality")

    p = sub.add_parser("synth", help="Generate the synthetic audio-visual corpus")
    common(p, out_required=False)

    p = sub.add_parser("train", help="Train a dense model")
    common(p)
    modality(p)

    p = sub.add_parser("prune", help="LTH-IF pruning (or one-shot with --oneshot)")
    common(p)
    modality(p)
    p.add_argument("--oneshot", action="store_true", help="Run the one-shot lottery ticket baseline instead")

    for name, text in (("eval", "Evaluate FRR/FAR on the test split"), ("calibrate", "Calibrate a threshold on dev")):
        p = sub.add_parser(name, help=text)
        common(p, out_required=(name == "eval"))
        p.add_argument("--checkpoint", type=Path, required=True)
        if name == "eval":
            p.add_argument("--threshold", type=float, default=None, help="Fixed threshold instead of the config policy")

    p = sub.add_parser("flops", help="Parameter and FLOPs tables for the four networks")
    common(p)

    p = sub.add_parser("report", help="Assemble tables and curves from finished runs")
    common(p)
    p.add_argument("runs", type=Path, help="Directory holding run directories")

    p = sub.add_parser("pipeline", help="synth, train, prune, eval and report end to end")
    common(p)
    return parser


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "report":
        build_report(args.runs, args.out)
        return EXIT_OK

    config = load_config(args.config, seed=args.seed)
    if getattr(args, "modality", None):
        config = config.for_modality(args.modality)

    if args.command == "synth":
        run_synth(config, args.out, overwrite=args.overwrite)
    elif args.command == "train":
        run_train(config, args.out, overwrite=args.overwrite)
    elif args.command == "prune":
        runner = run_oneshot if args.oneshot else run_prune
        runner(config, args.out, overwrite=args.overwrite)
    elif args.command == "eval":
        if args.threshold is not None and not 0.0 < args.threshold < 1.0:
            raise ConfigError(f"--threshold must be in (0, 1), got {args.threshold}")
        run_eval(config, args.checkpoint, args.out, threshold=args.threshold)
    elif args.command == "calibrate":
        run_calibrate(config, args.checkpoint, args.out)
    elif args.command == "flops":
        run_flops(config, args.out)
    elif args.command == "pipeline":
        run_pipeline(config, args.out, overwrite=args.overwrite)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return dispatch(args)
    except ConfigError as e:
        print(f"❌ Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericDivergenceError as e:
        print(f"❌ Training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except CalibrationError as e:
        print(f"❌ Calibration failed: {e}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (WWSError, OSError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
