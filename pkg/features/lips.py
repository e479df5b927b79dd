"""
Lip region preprocessing: grayscale frames resized to the encoder input size
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image

from tensor_core.errors import ContractError, ShapeError

LIP_SIZE = 88


@dataclass
class LipFrames:
    """Grayscale lip frames [time, 1, 88, 88] in [0, 1]"""

    frames: np.ndarray

    @property
    def time(self) -> int:
        return self.frames.shape[0]


def _resize_frame(frame: np.ndarray, size: int) -> np.ndarray:
    image = Image.fromarray(np.ascontiguousarray(frame, dtype=np.float32))
    resized = image.resize((size, size), resample=Image.BILINEAR)
    return np.asarray(resized, dtype=np.float64)


def preprocess_lip(raw: np.ndarray, size: int = LIP_SIZE) -> LipFrames:
    """
    Bilinear-resize square grayscale frames to size x size

    Args:
        raw: Frames shaped [time, h, w] or [time, 1, h, w] with values in [0, 1]
        size: Output side length

    Returns:
        LipFrames [time, 1, size, size]; output stays within the input's min/max
    """
    frames = np.asarray(raw, dtype=np.float64)
    if frames.ndim == 4:
        if frames.shape[1] != 1:
            raise ShapeError(f"Lip frames must be single channel, got {frames.shape[1]} channels")
        frames = frames[:, 0]
    if frames.ndim != 3:
        raise ShapeError(f"Expected lip frames [time, h, w], got shape {list(frames.shape)}")
    if frames.shape[1] != frames.shape[2]:
        raise ContractError(f"Lip frames must be square, got {frames.shape[1]}x{frames.shape[2]}")
    if frames.size and (frames.min() < 0.0 or frames.max() > 1.0):
        raise ContractError(f"Lip pixel values must lie in [0, 1], got [{frames.min()}, {frames.max()}]")

    if frames.shape[1] == size:
        return LipFrames(frames=frames[:, None].copy())

    low, high = frames.min(), frames.max()
    resized = np.stack([_resize_frame(frame, size) for frame in frames])
    return LipFrames(frames=np.clip(resized, low, high)[:, None])
