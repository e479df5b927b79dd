import numpy as np
import pytest

from synth_corpus.corpus import CorpusSettings, build_corpus
from wws_models.models import Batch
from wws_models.topology import BackendTopology, EncoderTopology, Topology

TINY_FRAME = 16
TINY_COUNTS = {"train": 8, "dev": 12, "test": 12}


def tiny_topology() -> Topology:
    return Topology(
        backend=BackendTopology(conv_channels=(2, 2), conv_kernel=3, time_stride=2, lstm_hidden=4, fc_hidden=4),
        encoder=EncoderTopology(stem_channels=4, ladder=((1, 4, 1, 2), (2, 6, 2, 2)), embed_dim=8, frame_size=TINY_FRAME),
    )


def tiny_config_dict(corpus_path, **overrides) -> dict:
    data = {
        "modality": "audio",
        "seed": 3,
        "corpus": {"path": str(corpus_path), "counts": dict(TINY_COUNTS), "lip_size": TINY_FRAME},
        "topology": {
            "backend": {"conv_channels": [2, 2], "lstm_hidden": 4, "fc_hidden": 4},
            "encoder": {"stem_channels": 4, "ladder": [[1, 4, 1, 2], [2, 6, 2, 2]], "embed_dim": 8,
                        "frame_size": TINY_FRAME},
        },
        "optimizer": {"epochs": 1, "batch_size": 4, "lr": 0.001},
        "pruning": {"T": 3, "p": 0.2},
        "threshold": {"target": 0.5},
    }
    data.update(overrides)
    return data


class ArrayDataset:
    """In-memory stand-in for CorpusDataset"""

    def __init__(self, labels, fbank=None, lips=None):
        self.labels = np.asarray(labels)
        self.fbank = None if fbank is None else np.asarray(fbank, dtype=np.float64)
        self.lips = None if lips is None else np.asarray(lips, dtype=np.float64)
        self.snr = ["0"] * len(self.labels)

    def __len__(self):
        return len(self.labels)

    def batch(self, indices, audio=True, lips=True):
        indices = np.asarray(indices)
        return Batch(
            labels=self.labels[indices],
            fbank=self.fbank[indices] if audio and self.fbank is not None else None,
            lips=self.lips[indices] if lips and self.lips is not None else None,
        )


@pytest.fixture
def make_dataset():
    """Build a small labelled dataset; audio classes are separated by a unit shift"""

    def build(n=6, lips=False, seed=0):
        rng = np.random.default_rng(seed)
        labels = np.arange(n) % 2
        fbank = rng.normal(size=(n, 128, 40)) + labels[:, None, None]
        frames = rng.uniform(0, 1, size=(n, 32, 1, TINY_FRAME, TINY_FRAME)) if lips else None
        return ArrayDataset(labels, fbank=fbank, lips=frames)

    return build


@pytest.fixture
def topology():
    return tiny_topology()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Small corpus with 16x16 lip frames, shared read-only across tests"""
    root = tmp_path_factory.mktemp("corpus")
    settings = CorpusSettings(counts=dict(TINY_COUNTS), lip_size=TINY_FRAME, seed=0)
    build_corpus(settings, root, overwrite=True)
    return root
