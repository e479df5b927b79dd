"""
Corpus assembly: per-split record files, the CSV manifest and FBank statistics
"""

import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from features.fbank import AudioClip, FbankSettings, FbankStats, compute_fbank_stats, extract_fbank, normalize_global
from features.lips import LIP_SIZE
from synth_corpus.generator import CLIP_SAMPLES, VIDEO_FRAMES, snr_label, synth_sample
from synth_corpus.records import SNR_FROM_CODE, RecordLayout, open_records, write_records
from tensor_core.errors import ArtifactExistsError, ContractError
from wws_models.models import Batch

SPLITS = ("train", "dev", "test")
MANIFEST_COLUMNS = ["split", "sample_id", "label", "snr_db", "seed", "file", "offset"]
MANIFEST_FILE = "manifest.csv"
STATS_FILE = "fbank_stats.json"

# generator seeds of different splits never overlap while a split holds fewer samples
SPLIT_SEED_BASE = {"train": 1_000_000, "dev": 2_000_000, "test": 3_000_000}
SEED_STRIDE = 10_000_000


@dataclass
class CorpusSettings:
    counts: Dict[str, int] = field(default_factory=lambda: {"train": 2000, "dev": 400, "test": 400})
    train_snrs: List[Optional[float]] = field(default_factory=lambda: [-5.0, 0.0, 5.0, None])
    eval_snrs: List[Optional[float]] = field(default_factory=lambda: [-5.0, 0.0, 5.0])
    seed: int = 0
    lip_size: int = LIP_SIZE

    def grid(self, split: str) -> List[Optional[float]]:
        return self.train_snrs if split == "train" else self.eval_snrs


@dataclass
class CorpusManifest:
    root: Path
    records: pd.DataFrame

    def split(self, name: str) -> pd.DataFrame:
        return self.records[self.records["split"] == name].reset_index(drop=True)

    @classmethod
    def load(cls, root: Path) -> "CorpusManifest":
        root = Path(root)
        path = root / MANIFEST_FILE
        if not path.exists():
            raise ContractError(f"No corpus manifest at {path}; run `synth` first")
        df = pd.read_csv(path, dtype={"snr_db": str})
        return cls(root=root, records=df)


def split_plan(split: str, count: int, settings: CorpusSettings) -> List[dict]:
    """Label, SNR and seed for every sample of a split (labels alternate, SNRs cycle per label)"""
    grid = settings.grid(split)
    if count and not grid:
        raise ContractError(f"Split '{split}' has samples but an empty SNR grid")
    base = settings.seed * SEED_STRIDE + SPLIT_SEED_BASE[split]
    return [
        {"label": i % 2, "snr_db": grid[(i // 2) % len(grid)], "seed": base + i}
        for i in range(count)
    ]


def _generate(plan: Iterable[dict], lip_size: int):
    for item in plan:
        yield synth_sample(item["label"], item["snr_db"], item["seed"], lip_size=lip_size)


def build_corpus(
    settings: CorpusSettings,
    out_dir: Path,
    overwrite: bool = False,
    fbank: FbankSettings = FbankSettings(),
) -> CorpusManifest:
    """
    Generate all splits, write record files, the manifest and training FBank stats

    Args:
        settings: Split sizes, SNR grids, corpus seed and lip frame size
        out_dir: Target directory
        overwrite: Replace an existing corpus instead of refusing

    Returns:
        CorpusManifest of the written corpus
    """
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        if not overwrite:
            raise ArtifactExistsError(f"{out_dir} already exists; pass --overwrite to replace it")
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    print("=" * 60)
    print("🎲 BUILDING SYNTHETIC CORPUS")
    print("=" * 60)

    layout = RecordLayout(clip_samples=CLIP_SAMPLES, frames=VIDEO_FRAMES, lip_size=settings.lip_size)
    rows = []
    for split in SPLITS:
        count = int(settings.counts.get(split, 0))
        plan = split_plan(split, count, settings)
        file_name = f"{split}.wwsrec"
        print(f"\n📦 {split}: generating {count} samples...")
        offsets = write_records(out_dir / file_name, _generate(plan, settings.lip_size), count, layout)
        for sample_id, (item, offset) in enumerate(zip(plan, offsets)):
            rows.append(
                {
                    "split": split,
                    "sample_id": sample_id,
                    "label": item["label"],
                    "snr_db": snr_label(item["snr_db"]),
                    "seed": item["seed"],
                    "file": file_name,
                    "offset": offset,
                }
            )
        print(f"   ✅ Wrote {count} records to {file_name}")

    manifest = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    manifest.to_csv(out_dir / MANIFEST_FILE, index=False, lineterminator="\n")
    print(f"\n✅ Manifest: {len(manifest)} samples")

    if settings.counts.get("train", 0):
        stats = compute_fbank_stats(
            extract_fbank(AudioClip(row["wave"].astype(np.float64), fbank.sample_rate), fbank)
            for row in open_records(out_dir / "train.wwsrec")
        )
        save_fbank_stats(out_dir / STATS_FILE, stats)
        print("   ✅ FBank statistics computed on the training split")

    return CorpusManifest(root=out_dir, records=manifest)


def save_fbank_stats(path: Path, stats: FbankStats):
    payload = {"mean": stats.mean.tolist(), "std": stats.std.tolist()}
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_fbank_stats(path: Path) -> FbankStats:
    path = Path(path)
    if not path.exists():
        raise ContractError(f"No FBank statistics at {path}; the training split may be empty")
    payload = json.loads(path.read_text(encoding="utf-8"))
    return FbankStats(mean=np.asarray(payload["mean"]), std=np.asarray(payload["std"]))


class CorpusDataset:
    """
    One split of a corpus, readable in batches

    Lip frames are memory-mapped; normalized FBank features are computed on
    first use and cached.
    """

    def __init__(self, root: Path, split: str, stats: Optional[FbankStats] = None,
                 fbank: FbankSettings = FbankSettings()):
        if split not in SPLITS:
            raise ContractError(f"Unknown split '{split}'; expected one of {SPLITS}")
        self.root = Path(root)
        self.split = split
        self.fbank_settings = fbank
        self.manifest = CorpusManifest.load(self.root).split(split)
        self.records = open_records(self.root / f"{split}.wwsrec")
        if len(self.records) != len(self.manifest):
            raise ContractError(f"{split}: manifest lists {len(self.manifest)} samples, record file holds {len(self.records)}")
        self.stats = stats if stats is not None else load_fbank_stats(self.root / STATS_FILE)
        self._fbank_cache: Dict[int, np.ndarray] = {}
        self._snr = [snr_label(SNR_FROM_CODE[int(code)]) for code in self.records["snr"]]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def labels(self) -> np.ndarray:
        return self.manifest["label"].to_numpy(dtype=np.int64)

    @property
    def snr(self) -> List[str]:
        return list(self._snr)

    def fbank(self, index: int) -> np.ndarray:
        if index not in self._fbank_cache:
            clip = AudioClip(self.records[index]["wave"].astype(np.float64), self.fbank_settings.sample_rate)
            self._fbank_cache[index] = normalize_global(extract_fbank(clip, self.fbank_settings), self.stats).frames
        return self._fbank_cache[index]

    def batch(self, indices: Sequence[int], audio: bool = True, lips: bool = True) -> Batch:
        indices = [int(i) for i in indices]
        return Batch(
            labels=np.asarray([int(self.records[i]["label"]) for i in indices], dtype=np.int64),
            fbank=np.stack([self.fbank(i) for i in indices]) if audio else None,
            lips=np.stack([self.records[i]["lips"].astype(np.float64) for i in indices]) if lips else None,
            snr=[self._snr[i] for i in indices],
        )
