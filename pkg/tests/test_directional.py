"""
End-to-end behaviour on a small corpus; run with `pytest -m slow`
"""

import numpy as np
import pytest

from harness.config import config_from_dict
from harness.experiments import load_split, trainer_factory
from harness.metrics import evaluate_scores, score_dataset, threshold_for_target
from lth_pruning.lth import global_sparsity, lth_if_run, lth_oneshot_run
from lth_pruning.masks import PruneScope, schedule_sparsity
from synth_corpus.corpus import build_corpus
from wws_models.loss import wws_loss
from wws_models.models import build_model

from conftest import tiny_config_dict

pytestmark = pytest.mark.slow

EPOCHS = 5


@pytest.fixture(scope="module")
def config(tmp_path_factory):
    root = tmp_path_factory.mktemp("directional")
    data = tiny_config_dict(root / "corpus")
    data["corpus"]["counts"] = {"train": 192, "dev": 96, "test": 96}
    data["corpus"]["eval_snrs"] = ["-5", "0", "5", "clean"]
    data["optimizer"] = {"epochs": EPOCHS, "batch_size": 8, "lr": 0.01}
    data["pruning"] = {"T": 4, "p": 0.3}
    data["threshold"] = {"target": 0.97}
    config = config_from_dict(data)
    build_corpus(config.corpus.settings(), config.corpus.path, fbank=config.features.settings())
    return config


def evaluate_on_test(cfg, model):
    """Test-split table at the dev-calibrated threshold, plus the raw test scores"""
    dev_scores = score_dataset(model, load_split(cfg, "dev"))
    threshold = threshold_for_target(dev_scores.loc[dev_scores["label"] == 1, "score"], cfg.threshold.target)
    scores = score_dataset(model, load_split(cfg, "test"))
    return evaluate_scores(scores, threshold).set_index("stratum"), scores


def mean_loss(scores) -> float:
    return wws_loss(scores["score"].to_numpy(), scores["label"].to_numpy()).item()


@pytest.fixture(scope="module")
def trained(config):
    runs = {}

    def run(modality):
        if modality not in runs:
            cfg = config.for_modality(modality)
            model = build_model(modality, cfg.topology, seed=cfg.seed)
            records = trainer_factory(cfg, verbose=False)(model).train(load_split(cfg, "train"), EPOCHS)
            table, scores = evaluate_on_test(cfg, model)
            runs[modality] = records, table, scores
        return runs[modality]

    return run


@pytest.mark.parametrize("modality", ["audio", "video", "av"])
def test_training_lowers_epoch_loss(trained, modality):
    records, _, _ = trained(modality)
    assert len(records) == EPOCHS
    assert records[-1].mean_loss < records[0].mean_loss


def test_audio_model_is_accurate_on_clean_speech(trained):
    _, _, scores = trained("audio")
    clean = evaluate_scores(scores, 0.5).set_index("stratum").loc["clean"]
    errors = clean["n_fr"] + clean["n_fa"]
    assert 1.0 - errors / (clean["n_wake"] + clean["n_nonwake"]) >= 0.95


def test_lips_help_in_heavy_noise(trained):
    _, audio, _ = trained("audio")
    _, av, _ = trained("av")
    assert av.loc["-5", "far"] <= audio.loc["-5", "far"]


def test_audio_helps_lips_in_light_noise(trained):
    _, video, _ = trained("video")
    _, av, _ = trained("av")
    assert av.loc["5", "far"] <= video.loc["5", "far"]


def test_iterative_pruning_keeps_dense_accuracy_and_beats_oneshot(config, trained):
    cfg = config.for_modality("audio")
    train = load_split(cfg, "train")
    make = trainer_factory(cfg, verbose=False)
    _, dense, _ = trained("audio")

    iterative = build_model("audio", cfg.topology, seed=cfg.seed)
    lth_if_run(iterative, train, make(iterative), T=cfg.pruning.T, p=cfg.pruning.p, E=EPOCHS)
    assert global_sparsity(iterative.registry) >= 0.5

    oneshot = build_model("audio", cfg.topology, seed=cfg.seed)
    total = PruneScope().total(oneshot.registry)
    lth_oneshot_run(oneshot, train, make, schedule_sparsity(total, cfg.pruning.p, cfg.pruning.T - 1), E=EPOCHS)
    assert global_sparsity(oneshot.registry) == pytest.approx(global_sparsity(iterative.registry))

    iterative_table, iterative_scores = evaluate_on_test(cfg, iterative)
    oneshot_table, oneshot_scores = evaluate_on_test(cfg, oneshot)
    assert iterative_table.loc["all", "far"] <= dense.loc["all", "far"] + 0.01

    # equal FAR counts are separated by test loss
    iterative_far, oneshot_far = iterative_table.loc["all", "far"], oneshot_table.loc["all", "far"]
    assert oneshot_far > iterative_far or (
        np.isclose(oneshot_far, iterative_far) and mean_loss(oneshot_scores) > mean_loss(iterative_scores)
    )
