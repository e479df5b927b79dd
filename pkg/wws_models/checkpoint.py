"""
Versioned binary checkpoint: weights, masks and run metadata

Layout (all integers little-endian):
    magic b"WWSCKPT\\0" | u16 version | u32 header length | UTF-8 JSON header
    u32 record count, then per parameter:
        u16 name length | name | u8 flags | u8 ndim | u32 dims... |
        float64 data | packed mask bits (only when flag HAS_MASK)
"""

import json
import struct
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from tensor_core.errors import ContractError
from wws_models.models import WWSModel, build_model
from wws_models.topology import Topology

MAGIC = b"WWSCKPT\0"
VERSION = 1

HAS_MASK = 1
PRUNABLE = 2
FROZEN = 4


def save_checkpoint(path: Path, model: WWSModel, metadata: Optional[dict] = None):
    header = {
        "modality": model.modality,
        "seed": model.seed,
        "topology": model.topology.to_dict(),
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    chunks = [MAGIC, struct.pack("<HI", VERSION, len(header_bytes)), header_bytes]
    entries = list(model.registry.items())
    chunks.append(struct.pack("<I", len(entries)))
    for name, entry in entries:
        encoded = name.encode("utf-8")
        flags = (HAS_MASK if entry.mask is not None else 0) | (PRUNABLE if entry.prunable else 0)
        flags |= FROZEN if entry.frozen else 0
        shape = entry.weight.data.shape
        chunks.append(struct.pack(f"<H{len(encoded)}sBB", len(encoded), encoded, flags, len(shape)))
        chunks.append(struct.pack(f"<{len(shape)}I", *shape))
        chunks.append(entry.weight.data.astype("<f8").tobytes())
        if entry.mask is not None:
            chunks.append(np.packbits(entry.mask.reshape(-1) > 0, bitorder="little").tobytes())

    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: Path) -> Tuple[WWSModel, dict]:
    """
    Rebuild a model from a checkpoint

    Returns:
        (model with weights, masks and frozen flags restored, metadata dict)
    """
    blob = Path(path).read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise ContractError(f"{path} is not a checkpoint (bad magic)")
    offset = len(MAGIC)
    version, header_len = struct.unpack_from("<HI", blob, offset)
    if version != VERSION:
        raise ContractError(f"Unsupported checkpoint version {version} in {path}")
    offset += struct.calcsize("<HI")
    header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    offset += header_len

    model = build_model(header["modality"], Topology.from_dict(header["topology"]), seed=header["seed"])
    registry = model.registry

    (count,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if count != len(registry):
        raise ContractError(f"Checkpoint holds {count} parameters, model has {len(registry)}")

    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        flags, ndim = struct.unpack_from("<BB", blob, offset)
        offset += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
        size = int(np.prod(shape))
        data = np.frombuffer(blob, dtype="<f8", count=size, offset=offset).reshape(shape)
        offset += 8 * size

        entry = registry[name]
        if entry.weight.data.shape != tuple(shape):
            raise ContractError(f"Parameter '{name}' has shape {list(shape)} in checkpoint, {list(entry.weight.shape)} in model")
        entry.weight.data[...] = data
        if flags & HAS_MASK:
            n_bytes = (size + 7) // 8
            bits = np.frombuffer(blob, dtype=np.uint8, count=n_bytes, offset=offset)
            offset += n_bytes
            entry.mask = np.unpackbits(bits, count=size, bitorder="little").astype(np.float64).reshape(shape)
        if flags & FROZEN:
            registry.freeze(lambda n, target=name: n == target)

    return model, header["metadata"]
