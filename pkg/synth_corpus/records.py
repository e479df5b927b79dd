"""
Versioned binary record files for corpus samples

Layout (little-endian):
    magic b"WWSREC\\0\\0" | u16 version | u32 count | u32 clip samples |
    u16 frames | u16 lip size
    then `count` fixed-size records:
        u32 id | u8 label | u8 snr code | u64 seed |
        float32 waveform[clip samples] | float32 lips[frames, 1, size, size]
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Optional

import numpy as np

from tensor_core.errors import ContractError

MAGIC = b"WWSREC\0\0"
VERSION = 1
HEADER = struct.Struct("<8sHIIHH")

SNR_CODES = {-5.0: 0, 0.0: 1, 5.0: 2, None: 3}
SNR_FROM_CODE = {code: snr for snr, code in SNR_CODES.items()}


@dataclass(frozen=True)
class RecordLayout:
    clip_samples: int
    frames: int
    lip_size: int

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(
            [
                ("id", "<u4"),
                ("label", "u1"),
                ("snr", "u1"),
                ("seed", "<u8"),
                ("wave", "<f4", (self.clip_samples,)),
                ("lips", "<f4", (self.frames, 1, self.lip_size, self.lip_size)),
            ]
        )

    @property
    def record_size(self) -> int:
        return self.dtype.itemsize


def snr_code(snr_db: Optional[float]) -> int:
    key = None if snr_db is None else float(snr_db)
    if key not in SNR_CODES:
        raise ContractError(f"SNR {snr_db} has no record code; expected one of {list(SNR_CODES)}")
    return SNR_CODES[key]


class RecordWriter:
    """Streams samples into a record file; the header count is fixed up front"""

    def __init__(self, path: Path, count: int, layout: RecordLayout):
        self.path = Path(path)
        self.count = count
        self.layout = layout
        self.written = 0
        self._handle: Optional[BinaryIO] = None

    def __enter__(self):
        self._handle = open(self.path, "wb")
        self._handle.write(
            HEADER.pack(MAGIC, VERSION, self.count, self.layout.clip_samples, self.layout.frames, self.layout.lip_size)
        )
        return self

    def __exit__(self, exc_type, exc, tb):
        self._handle.close()
        if exc_type is None and self.written != self.count:
            raise ContractError(f"{self.path}: header promised {self.count} records, wrote {self.written}")

    def offset_of(self, index: int) -> int:
        return HEADER.size + index * self.layout.record_size

    def write(self, sample_id: int, sample) -> int:
        """Append one sample; returns its byte offset"""
        record = np.zeros(1, dtype=self.layout.dtype)
        record["id"] = sample_id
        record["label"] = sample.label
        record["snr"] = snr_code(sample.snr_db)
        record["seed"] = sample.seed
        record["wave"][0] = sample.clip.samples
        record["lips"][0] = sample.lips.frames
        offset = self.offset_of(self.written)
        self._handle.write(record.tobytes())
        self.written += 1
        return offset


def write_records(path: Path, samples: Iterable, count: int, layout: RecordLayout) -> list:
    """Write samples (in order, ids 0..count-1) and return their byte offsets"""
    offsets = []
    with RecordWriter(path, count, layout) as writer:
        for sample_id, sample in enumerate(samples):
            offsets.append(writer.write(sample_id, sample))
    return offsets


def read_layout(path: Path):
    with open(path, "rb") as handle:
        raw = handle.read(HEADER.size)
    if len(raw) != HEADER.size:
        raise ContractError(f"{path} is too short to be a record file")
    magic, version, count, clip_samples, frames, lip_size = HEADER.unpack(raw)
    if magic != MAGIC:
        raise ContractError(f"{path} is not a record file (bad magic)")
    if version != VERSION:
        raise ContractError(f"Unsupported record version {version} in {path}")
    return count, RecordLayout(clip_samples=clip_samples, frames=frames, lip_size=lip_size)


def open_records(path: Path) -> np.ndarray:
    """Memory-map every record of a file as a structured array"""
    count, layout = read_layout(path)
    if count == 0:
        return np.zeros(0, dtype=layout.dtype)
    return np.memmap(path, dtype=layout.dtype, mode="r", offset=HEADER.size, shape=(count,))


def read_sample(path: Path, offset: int) -> dict:
    """Read the record starting at a byte offset"""
    _, layout = read_layout(path)
    if offset < HEADER.size or (offset - HEADER.size) % layout.record_size:
        raise ContractError(f"Offset {offset} is not a record boundary in {path}")
    with open(path, "rb") as handle:
        handle.seek(offset)
        raw = handle.read(layout.record_size)
    if len(raw) != layout.record_size:
        raise ContractError(f"Offset {offset} is past the end of {path}")
    record = np.frombuffer(raw, dtype=layout.dtype)[0]
    return {
        "id": int(record["id"]),
        "label": int(record["label"]),
        "snr_db": SNR_FROM_CODE[int(record["snr"])],
        "seed": int(record["seed"]),
        "waveform": record["wave"].astype(np.float64),
        "lips": record["lips"].astype(np.float64),
    }
