"""
Log mel filterbank (FBank) front end with global mean/variance normalization
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import librosa
import numpy as np

from tensor_core.errors import ContractError, ShapeError

FBANK_DIM = 40
STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FbankSettings:
    sample_rate: int = 16000
    window_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 512
    n_mels: int = FBANK_DIM
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-10

    @property
    def window(self) -> int:
        return int(round(self.sample_rate * self.window_ms / 1000.0))

    @property
    def hop(self) -> int:
        return int(round(self.sample_rate * self.hop_ms / 1000.0))

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.window:
            return 0
        return 1 + (n_samples - self.window) // self.hop


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int = 16000


@dataclass
class FbankFeatures:
    frames: np.ndarray
    normalized: bool = False

    @property
    def time(self) -> int:
        return self.frames.shape[0]


@dataclass
class FbankStats:
    mean: np.ndarray
    std: np.ndarray


@lru_cache(maxsize=8)
def mel_matrix(settings: FbankSettings) -> np.ndarray:
    """Triangular HTK-scale mel weights [n_mels, n_fft // 2 + 1], unnormalized"""
    return librosa.filters.mel(
        sr=settings.sample_rate,
        n_fft=settings.n_fft,
        n_mels=settings.n_mels,
        fmin=settings.fmin,
        fmax=settings.fmax,
        htk=True,
        norm=None,
    ).astype(np.float64)


def mel_band_centers(settings: FbankSettings = FbankSettings()) -> np.ndarray:
    edges = librosa.mel_frequencies(
        n_mels=settings.n_mels + 2, fmin=settings.fmin, fmax=settings.fmax, htk=True
    )
    return edges[1:-1]


def extract_fbank(clip: AudioClip, settings: FbankSettings = FbankSettings()) -> FbankFeatures:
    """
    Hamming-windowed STFT magnitude -> mel filterbank -> natural log

    Args:
        clip: Mono waveform
        settings: Framing and filterbank parameters

    Returns:
        FbankFeatures [frames, n_mels]
    """
    if clip.sample_rate != settings.sample_rate:
        raise ContractError(f"Clip sample rate {clip.sample_rate} Hz does not match configured {settings.sample_rate} Hz")
    samples = np.asarray(clip.samples, dtype=np.float64)
    if samples.ndim != 1:
        raise ShapeError(f"Expected a mono waveform, got shape {list(samples.shape)}")
    n_frames = settings.frame_count(len(samples))
    if n_frames == 0:
        raise ContractError(f"Clip of {len(samples)} samples is shorter than one {settings.window}-sample frame")

    frames = np.lib.stride_tricks.sliding_window_view(samples, settings.window)[:: settings.hop][:n_frames]
    spectrum = np.abs(np.fft.rfft(frames * np.hamming(settings.window), n=settings.n_fft, axis=1))
    energies = spectrum @ mel_matrix(settings).T
    return FbankFeatures(frames=np.log(np.maximum(energies, settings.log_floor)))


def compute_fbank_stats(features: Iterable[FbankFeatures]) -> FbankStats:
    """Per-dimension mean and floored std over every frame of a (training) corpus"""
    stacked = [f.frames for f in features]
    if not stacked:
        raise ContractError("Cannot compute FBank statistics from an empty feature list")
    frames = np.concatenate(stacked, axis=0)
    return FbankStats(mean=frames.mean(axis=0), std=np.maximum(frames.std(axis=0), STD_FLOOR))


def normalize_global(feats: FbankFeatures, stats: FbankStats) -> FbankFeatures:
    mean = np.asarray(stats.mean, dtype=np.float64)
    std = np.asarray(stats.std, dtype=np.float64)
    if mean.shape != (FBANK_DIM,) or std.shape != (FBANK_DIM,):
        raise ContractError(f"FBank stats must be {FBANK_DIM}-dimensional, got mean {list(mean.shape)} std {list(std.shape)}")
    if feats.frames.shape[-1] != FBANK_DIM:
        raise ShapeError(f"Features have width {feats.frames.shape[-1]}, expected {FBANK_DIM}")
    centered = feats.frames - mean
    # degenerate dimensions map to 0 even when the float mean is off by an ulp
    centered[..., std <= STD_FLOOR] = 0.0
    return FbankFeatures(frames=centered / np.maximum(std, STD_FLOOR), normalized=True)
