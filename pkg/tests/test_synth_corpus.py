import numpy as np
import pandas as pd
import pytest

from synth_corpus.corpus import (
    MANIFEST_FILE,
    STATS_FILE,
    CorpusDataset,
    CorpusManifest,
    CorpusSettings,
    build_corpus,
)
from synth_corpus.generator import (
    CLIP_SAMPLES,
    VIDEO_FRAMES,
    canonical_aperture,
    mix_noise,
    noise_gain,
    parse_snr,
    snr_label,
    synth_sample,
    template_score,
    wake_template,
)
from synth_corpus.records import read_sample
from tensor_core.errors import ArtifactExistsError, ContractError

from conftest import TINY_COUNTS, TINY_FRAME


def power(x):
    return float(np.mean(np.asarray(x) ** 2))


class TestMixing:
    @pytest.fixture
    def pair(self, rng):
        clean = rng.uniform(-0.1, 0.1, 4000)
        noise = rng.normal(size=4000)
        return clean, noise * np.sqrt(power(clean) / power(noise))

    def test_equal_power_at_zero_db_has_unit_gain(self, pair):
        clean, noise = pair
        assert noise_gain(clean, noise, 0.0) == pytest.approx(1.0)
        np.testing.assert_allclose(mix_noise(clean, noise, 0.0), clean + noise, atol=1e-15)

    def test_minus_six_db_doubles_noise(self, pair):
        clean, noise = pair
        assert noise_gain(clean, noise, -20 * np.log10(2.0)) == pytest.approx(2.0)

    @pytest.mark.parametrize("snr", [-5.0, 0.0, 5.0])
    def test_measured_snr(self, pair, snr):
        clean, noise = pair
        noise = 0.05 * noise
        mixed = mix_noise(clean, noise, snr)
        measured = 10 * np.log10(power(clean) / power(mixed - clean))
        assert measured == pytest.approx(snr, abs=0.01)

    def test_very_high_snr_is_nearly_clean(self, pair):
        clean, noise = pair
        np.testing.assert_allclose(mix_noise(clean, noise, 100.0), clean, atol=1e-5)

    def test_clean_label_returns_copy(self, pair):
        clean, noise = pair
        out = mix_noise(clean, noise, None)
        np.testing.assert_array_equal(out, clean)
        assert out is not clean

    def test_peak_normalization(self, rng):
        clean = rng.uniform(-0.9, 0.9, 1000)
        mixed = mix_noise(clean, rng.normal(size=1000), -5.0)
        assert np.max(np.abs(mixed)) == pytest.approx(1.0)

    def test_zero_power_noise(self, pair):
        with pytest.raises(ContractError):
            mix_noise(pair[0], np.zeros_like(pair[0]), 0.0)

    def test_length_mismatch(self, pair):
        with pytest.raises(ContractError):
            mix_noise(pair[0], pair[1][:-1], 0.0)


class TestSnrLabels:
    @pytest.mark.parametrize("snr, label", [(-5.0, "-5"), (0.0, "0"), (5.0, "5"), (None, "clean")])
    def test_labels(self, snr, label):
        assert snr_label(snr) == label
        assert parse_snr(label) == snr


class TestSample:
    def test_deterministic(self):
        a = synth_sample(1, 0.0, seed=42, lip_size=TINY_FRAME)
        b = synth_sample(1, 0.0, seed=42, lip_size=TINY_FRAME)
        assert a.clip.samples.tobytes() == b.clip.samples.tobytes()
        assert a.lips.frames.tobytes() == b.lips.frames.tobytes()

    def test_shapes(self):
        sample = synth_sample(0, None, seed=1, lip_size=TINY_FRAME)
        assert sample.clip.samples.shape == (CLIP_SAMPLES,)
        assert sample.lips.frames.shape == (VIDEO_FRAMES, 1, TINY_FRAME, TINY_FRAME)
        assert sample.snr_label == "clean"

    def test_positive_lips_open(self):
        sample = synth_sample(1, None, seed=5, lip_size=TINY_FRAME)
        assert sample.aperture.max() > 0.3

    def test_invalid_label(self):
        with pytest.raises(ContractError):
            synth_sample(2, None, seed=0)

    def test_template_score_matches_direct_correlation(self, rng):
        template = wake_template()
        waveform = rng.normal(scale=0.05, size=template.size + 700)
        waveform[300 : 300 + template.size] += 0.8 * template
        direct = np.max(np.abs(np.correlate(waveform, template, mode="valid"))) / np.dot(template, template)
        assert template_score(waveform) == pytest.approx(direct, rel=1e-9)
        assert template_score(waveform) == pytest.approx(0.8, abs=0.05)

    def test_template_score_needs_a_full_window(self):
        with pytest.raises(ContractError):
            template_score(np.zeros(100))


ORACLE_SEEDS = 1000


@pytest.fixture(scope="module")
def clean_population():
    """Template scores and lip apertures of clean samples, 1000 seeds per class"""
    population = {}
    for label in (0, 1):
        samples = (synth_sample(label, None, seed=seed, lip_size=TINY_FRAME) for seed in range(ORACLE_SEEDS))
        population[label] = [(template_score(s.clip.samples), s.aperture) for s in samples]
    return population


def aperture_correlation(aperture, reference):
    if np.std(aperture) == 0.0:
        return 0.0
    return float(np.corrcoef(aperture, reference)[0, 1])


class TestPopulation:
    def test_every_positive_beats_the_negative_99th_percentile(self, clean_population):
        negative = [score for score, _ in clean_population[0]]
        positive = np.array([score for score, _ in clean_population[1]])
        assert positive.min() > np.percentile(negative, 99)

    def test_negative_lips_do_not_follow_the_wake_trajectory(self, clean_population):
        reference = canonical_aperture()
        correlations = [aperture_correlation(aperture, reference) for _, aperture in clean_population[0]]
        assert np.mean(np.abs(correlations)) < 0.2

    def test_positive_lips_move(self, clean_population):
        assert all(np.std(aperture) > 0.0 for _, aperture in clean_population[1])


class TestCorpus:
    def test_manifest_counts_and_balance(self, tiny_corpus):
        manifest = CorpusManifest.load(tiny_corpus)
        for split, count in TINY_COUNTS.items():
            rows = manifest.split(split)
            assert len(rows) == count
            assert rows["label"].sum() == count // 2
            assert rows["sample_id"].tolist() == list(range(count))

    def test_snr_strata(self, tiny_corpus):
        manifest = CorpusManifest.load(tiny_corpus)
        assert set(manifest.split("train")["snr_db"]) == {"-5", "0", "5", "clean"}
        dev = manifest.split("dev")
        assert dev.groupby("snr_db").size().to_dict() == {"-5": 4, "0": 4, "5": 4}
        assert dev.groupby(["snr_db", "label"]).size().min() == 2

    def test_split_seeds_are_disjoint(self, tiny_corpus):
        manifest = CorpusManifest.load(tiny_corpus)
        seeds = {split: set(manifest.split(split)["seed"]) for split in TINY_COUNTS}
        assert not seeds["train"] & seeds["dev"]
        assert not seeds["train"] & seeds["test"]
        assert not seeds["dev"] & seeds["test"]

    def test_stats_written(self, tiny_corpus):
        assert (tiny_corpus / STATS_FILE).exists()
        df = pd.read_csv(tiny_corpus / MANIFEST_FILE)
        assert list(df.columns) == ["split", "sample_id", "label", "snr_db", "seed", "file", "offset"]

    def test_record_offsets_match_generator(self, tiny_corpus):
        row = CorpusManifest.load(tiny_corpus).split("dev").iloc[3]
        record = read_sample(tiny_corpus / row["file"], int(row["offset"]))
        assert record["id"] == 3
        assert record["label"] == row["label"]
        assert record["seed"] == row["seed"]
        assert snr_label(record["snr_db"]) == row["snr_db"]

        sample = synth_sample(int(row["label"]), parse_snr(row["snr_db"]), int(row["seed"]), lip_size=TINY_FRAME)
        np.testing.assert_array_equal(record["waveform"], sample.clip.samples.astype(np.float32))
        np.testing.assert_array_equal(record["lips"], sample.lips.frames.astype(np.float32))

    def test_bad_offset(self, tiny_corpus):
        with pytest.raises(ContractError):
            read_sample(tiny_corpus / "dev.wwsrec", 3)

    def test_dataset_batch(self, tiny_corpus):
        dev = CorpusDataset(tiny_corpus, "dev")
        batch = dev.batch([0, 5, 7])
        assert batch.fbank.shape == (3, 128, 40)
        assert batch.lips.shape == (3, VIDEO_FRAMES, 1, TINY_FRAME, TINY_FRAME)
        assert batch.labels.tolist() == [0, 1, 1]
        assert batch.snr == [dev.snr[0], dev.snr[5], dev.snr[7]]
        assert dev.batch([1], audio=False).fbank is None

    def test_existing_corpus_is_protected(self, tiny_corpus):
        settings = CorpusSettings(counts=dict(TINY_COUNTS), lip_size=TINY_FRAME)
        with pytest.raises(ArtifactExistsError):
            build_corpus(settings, tiny_corpus)
        assert (tiny_corpus / MANIFEST_FILE).exists()

    def test_empty_corpus(self, tmp_path):
        manifest = build_corpus(CorpusSettings(counts={"train": 0, "dev": 0, "test": 0}), tmp_path / "empty")
        assert manifest.records.empty
        assert not (tmp_path / "empty" / STATS_FILE).exists()
        with pytest.raises(ContractError):
            CorpusDataset(tmp_path / "empty", "dev")

    def test_unknown_split(self, tiny_corpus):
        with pytest.raises(ContractError):
            CorpusDataset(tiny_corpus, "holdout")
