import hashlib
import json
from pathlib import Path

import pandas as pd
import pytest

from app import EXIT_CALIBRATION, EXIT_CONFIG, EXIT_ERROR, EXIT_OK, main
from wws_models.checkpoint import load_checkpoint

from conftest import tiny_config_dict


def write_config(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


@pytest.fixture
def config_path(tmp_path, tiny_corpus):
    return write_config(tmp_path / "config.json", tiny_config_dict(tiny_corpus))


def test_unknown_config_key_exits_with_config_code(tmp_path, capsys):
    path = write_config(tmp_path / "bad.json", {"pruning": {"rate": 0.3}})
    assert main(["train", "--config", path, "--out", str(tmp_path / "run")]) == EXIT_CONFIG
    assert "pruning.rate" in capsys.readouterr().err


def test_threshold_out_of_range(tmp_path):
    code = main(["eval", "--checkpoint", str(tmp_path / "none.wws"), "--out", str(tmp_path), "--threshold", "1.5"])
    assert code == EXIT_CONFIG


def test_report_on_empty_directory(tmp_path):
    (tmp_path / "runs").mkdir()
    assert main(["report", "--out", str(tmp_path / "report"), str(tmp_path / "runs")]) == EXIT_OK
    assert (tmp_path / "report" / "skipped.csv").exists()


def test_flops_tables(tmp_path, config_path):
    assert main(["flops", "--config", config_path, "--out", str(tmp_path / "flops")]) == EXIT_OK
    table = pd.read_csv(tmp_path / "flops" / "cost_table.csv")
    assert table["network"].tolist() == ["audio", "lip_encoder", "video", "av"]
    assert (table["flops"] > 0).all()


def test_train_eval_and_refuse_overwrite(tmp_path, config_path):
    run = tmp_path / "train_audio"
    assert main(["train", "--config", config_path, "--out", str(run)]) == EXIT_OK
    for name in ("checkpoint.wws", "train_log.csv", "cost.csv", "sparsity.csv", "run.json"):
        assert (run / name).exists()
    _, metadata = load_checkpoint(run / "checkpoint.wws")
    assert metadata["kind"] == "train"

    assert main(["eval", "--config", config_path, "--checkpoint", str(run / "checkpoint.wws"), "--out", str(run)]) == EXIT_OK
    table = pd.read_csv(run / "eval.csv", dtype={"stratum": str})
    assert table["stratum"].tolist() == ["all", "-5", "0", "5"]
    assert table.loc[0, "n_wake"] + table.loc[0, "n_nonwake"] == 12

    assert main(["train", "--config", config_path, "--out", str(run)]) == EXIT_ERROR
    assert main(["train", "--config", config_path, "--out", str(run), "--overwrite"]) == EXIT_OK


def test_prune_then_report(tmp_path, config_path):
    runs = tmp_path / "runs"
    assert main(["prune", "--config", config_path, "--out", str(runs / "prune_audio")]) == EXIT_OK
    history = pd.read_csv(runs / "prune_audio" / "history.csv")
    assert history["step"].tolist() == [1, 2, 3]
    assert history["global_sparsity"].is_monotonic_increasing
    assert any(c.startswith("dev_FAR_") for c in history.columns)

    assert main(["prune", "--oneshot", "--config", config_path, "--out", str(runs / "oneshot_audio")]) == EXIT_OK
    meta = json.loads((runs / "oneshot_audio" / "run.json").read_text(encoding="utf-8"))
    lth = json.loads((runs / "prune_audio" / "run.json").read_text(encoding="utf-8"))
    assert meta["target_sparsity"] == pytest.approx(lth["global_sparsity"])

    assert main(["report", "--out", str(tmp_path / "report"), str(runs)]) == EXIT_OK
    curve = pd.read_csv(tmp_path / "report" / "curve_prune_audio.csv")
    assert len(curve) == 3
    pruning = pd.read_csv(tmp_path / "report" / "table_pruning.csv")
    assert set(pruning["run"]) == {"prune_audio", "oneshot_audio"}


def test_calibration_without_dev_positives(tmp_path):
    corpus = tmp_path / "corpus"
    data = tiny_config_dict(corpus)
    data["corpus"]["counts"] = {"train": 2, "dev": 1, "test": 1}
    path = write_config(tmp_path / "config.json", data)

    assert main(["synth", "--config", path]) == EXIT_OK
    assert main(["train", "--config", path, "--out", str(tmp_path / "run")]) == EXIT_OK
    code = main(["calibrate", "--config", path, "--checkpoint", str(tmp_path / "run" / "checkpoint.wws")])
    assert code == EXIT_CALIBRATION


def test_missing_checkpoint_is_reported_without_traceback(tmp_path, config_path, capsys):
    code = main(["eval", "--config", config_path, "--checkpoint", str(tmp_path / "none.wws"), "--out", str(tmp_path)])
    assert code == EXIT_ERROR
    assert "❌" in capsys.readouterr().err


def test_checkpoint_stores_corpus_relative_to_run(tmp_path, config_path, tiny_corpus):
    run = tmp_path / "nested" / "train_audio"
    assert main(["train", "--config", config_path, "--out", str(run)]) == EXIT_OK
    _, metadata = load_checkpoint(run / "checkpoint.wws")
    stored = metadata["config"]["corpus"]["path"]
    assert not Path(stored).is_absolute()
    assert (run / stored).resolve() == Path(tiny_corpus).resolve()


def artifact_digests(root):
    return {
        path.relative_to(root).as_posix(): hashlib.sha256(path.read_bytes()).hexdigest()
        for path in sorted(root.rglob("*"))
        if path.is_file()
    }


@pytest.mark.slow
def test_pipeline_is_byte_reproducible(tmp_path):
    config_path = write_config(tmp_path / "config.json", tiny_config_dict(tmp_path / "unused"))
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["pipeline", "--config", config_path, "--out", str(first)]) == EXIT_OK
    assert main(["pipeline", "--config", config_path, "--out", str(second)]) == EXIT_OK

    digests = artifact_digests(first)
    assert any(name.endswith("checkpoint.wws") for name in digests)
    assert digests == artifact_digests(second)
