import json

import pandas as pd
import pytest

from harness.plots import CURVE_DIV_ID, curve_frame, far_columns, far_curve_figure
from harness.report import FAR_TABLE_COLUMNS, SKIP_COLUMNS, build_report

T = 4


def write_run(path, meta, eval_rows=None, sparsity=None, history=None):
    path.mkdir(parents=True)
    (path / "run.json").write_text(json.dumps(meta), encoding="utf-8")
    if eval_rows is not None:
        pd.DataFrame(eval_rows).to_csv(path / "eval.csv", index=False)
    if sparsity is not None:
        pd.DataFrame([sparsity]).to_csv(path / "sparsity.csv", index=False)
    if history is not None:
        pd.DataFrame(history).to_csv(path / "history.csv", index=False)


def eval_rows(threshold, frr, far_by_snr):
    rows = [{"threshold": threshold, "stratum": "all", "frr": frr, "far": sum(far_by_snr.values()) / len(far_by_snr)}]
    rows += [{"threshold": threshold, "stratum": snr, "frr": frr, "far": far} for snr, far in far_by_snr.items()]
    return rows


def history_rows(n):
    return [
        {
            "step": t,
            "phase": "lth-if",
            "t": t,
            "epochs": 1,
            "global_sparsity": 1 - 0.8 ** (t - 1),
            "train_loss": 0.5,
            "dev_FAR": 0.1,
            "dev_FAR_-5dB": 0.2 + 0.01 * t,
            "dev_FAR_5dB": 0.05,
        }
        for t in range(1, n + 1)
    ]


@pytest.fixture
def runs(tmp_path):
    root = tmp_path / "runs"
    write_run(
        root / "train_audio",
        {"kind": "train", "modality": "audio"},
        eval_rows=eval_rows(0.4, 0.03, {"-5": 0.2, "5": 0.04}),
        sparsity={"model": "audio", "conv": 0.0, "lstm": 0.0, "fc": 0.0, "total": 0.0},
    )
    write_run(
        root / "prune_audio",
        {"kind": "lth-if", "modality": "audio", "regime": "lth-if"},
        eval_rows=eval_rows(0.45, 0.03, {"-5": 0.25, "5": 0.05}),
        sparsity={"model": "audio", "conv": 50.0, "lstm": 60.0, "fc": 40.0, "total": 59.0},
        history=history_rows(T),
    )
    write_run(root / "prune_video", {"kind": "lth-if", "modality": "video", "regime": "lth-if"})
    return root


def test_empty_directory(tmp_path):
    (tmp_path / "runs").mkdir()
    skipped = build_report(tmp_path / "runs", tmp_path / "report")
    assert skipped.empty
    assert list(pd.read_csv(tmp_path / "report" / "skipped.csv").columns) == SKIP_COLUMNS
    assert list(pd.read_csv(tmp_path / "report" / "table_far.csv").columns) == FAR_TABLE_COLUMNS


def test_far_table(runs, tmp_path):
    build_report(runs, tmp_path / "report")
    far = pd.read_csv(tmp_path / "report" / "table_far.csv").set_index("run")
    assert list(far.columns[:5]) == FAR_TABLE_COLUMNS[1:]
    assert far.loc["train_audio", "threshold"] == 0.4
    assert far.loc["train_audio", "one_minus_frr"] == pytest.approx(0.97)
    assert far.loc["prune_audio", "far_-5"] == 0.25


def test_pruning_and_layer_tables(runs, tmp_path):
    build_report(runs, tmp_path / "report")
    pruning = pd.read_csv(tmp_path / "report" / "table_pruning.csv").set_index("run")
    assert pruning.loc["train_audio", "method"] == "unpruned"
    assert pruning.loc["prune_audio", "method"] == "lth-if"
    assert pruning.loc["prune_audio", "pruned_pct"] == 59.0

    layers = pd.read_csv(tmp_path / "report" / "table_layer_sparsity.csv")
    assert layers["run"].tolist() == ["prune_audio"]
    assert layers.loc[0, "lstm"] == 60.0


def test_curve_has_one_point_per_iteration(runs, tmp_path):
    build_report(runs, tmp_path / "report")
    curve = pd.read_csv(tmp_path / "report" / "curve_prune_audio.csv")
    assert len(curve) == T
    assert curve["step"].tolist() == list(range(1, T + 1))
    html = (tmp_path / "report" / "curve_prune_audio.html").read_text(encoding="utf-8")
    assert f'id="{CURVE_DIV_ID}"' in html


def test_missing_artifacts_are_listed(runs, tmp_path):
    skipped = build_report(runs, tmp_path / "report")
    artifacts = set(skipped["artifact"])
    assert {"table_far:prune_video", "table_pruning:prune_video", "curve_prune_video"} <= artifacts
    assert not (tmp_path / "report" / "curve_prune_video.csv").exists()


class TestCurveFigure:
    def test_lines_and_reference(self):
        curve = curve_frame(pd.DataFrame(history_rows(3)))
        assert far_columns(curve) == ["dev_FAR_-5dB", "dev_FAR_5dB"]
        fig = far_curve_figure(curve, "demo")
        assert len(fig.data) == 4
        measured, reference = fig.data[0], fig.data[1]
        assert list(measured.y) == pytest.approx([21.0, 22.0, 23.0])
        assert list(reference.y) == pytest.approx([21.0, 21.0])
        assert reference.line.dash == "dash"
