"""
Seeded audio-visual sample generator

Positive clips carry one two-tone chirp (the wake pattern) with a lip
aperture sequence that opens twice in sync with it. Negative clips carry
steady distractor tones and static or jittering lips. Mixed noise degrades
the audio only.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from features.fbank import AudioClip
from features.lips import LIP_SIZE, LipFrames, preprocess_lip
from tensor_core.errors import ContractError

SAMPLE_RATE = 16000
CLIP_SECONDS = 1.3
CLIP_SAMPLES = int(SAMPLE_RATE * CLIP_SECONDS)
VIDEO_FPS = 25
VIDEO_FRAMES = int(VIDEO_FPS * CLIP_SECONDS)
RAW_LIP_SIZE = 96

WAKE_SECONDS = 0.4
WAKE_SAMPLES = int(SAMPLE_RATE * WAKE_SECONDS)
BACKGROUND_LEVEL = 0.02
WEAK_LIP_SHARE = 0.2

SNR_LEVELS = (-5.0, 0.0, 5.0)


@dataclass
class Sample:
    clip: AudioClip
    lips: LipFrames
    label: int
    snr_db: Optional[float]
    seed: int
    onset: float
    aperture: np.ndarray

    @property
    def snr_label(self) -> str:
        return snr_label(self.snr_db)


def snr_label(snr_db: Optional[float]) -> str:
    return "clean" if snr_db is None else f"{snr_db:g}"


def parse_snr(value) -> Optional[float]:
    if value is None or str(value).lower() == "clean":
        return None
    return float(value)


@lru_cache(maxsize=1)
def wake_template() -> np.ndarray:
    """Canonical wake pattern: Hann-windowed chirp 600->1400 Hz plus its octave"""
    t = np.arange(WAKE_SAMPLES) / SAMPLE_RATE
    sweep = 600.0 + (1400.0 - 600.0) * t / WAKE_SECONDS
    phase = 2 * np.pi * np.cumsum(sweep) / SAMPLE_RATE
    tone = 0.6 * np.sin(phase) + 0.4 * np.sin(2.0 * phase)
    return tone * np.hanning(WAKE_SAMPLES)


def template_score(waveform: np.ndarray) -> float:
    """Peak normalized cross-correlation of a waveform with the wake template"""
    template = wake_template()
    waveform = np.asarray(waveform, dtype=np.float64)
    if waveform.size < template.size:
        raise ContractError(f"Waveform of {waveform.size} samples is shorter than the wake template")
    n_fft = 1 << int(np.ceil(np.log2(waveform.size)))
    spectrum = np.fft.rfft(waveform, n_fft) * np.conj(np.fft.rfft(template, n_fft))
    response = np.fft.irfft(spectrum, n_fft)[: waveform.size - template.size + 1]
    return float(np.max(np.abs(response)) / np.dot(template, template))


def pink_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """1/f noise shaped in the frequency domain, unit RMS"""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n)
    freqs[0] = freqs[1]
    noise = np.fft.irfft(spectrum / np.sqrt(freqs), n=n)
    return noise / np.sqrt(np.mean(noise ** 2))


def babble_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Pink noise plus randomly gated tone bursts, unit RMS"""
    noise = pink_noise(n, rng)
    t = np.arange(n) / SAMPLE_RATE
    for _ in range(int(rng.integers(3, 7))):
        start = int(rng.integers(0, n - SAMPLE_RATE // 10))
        length = int(rng.integers(SAMPLE_RATE // 20, SAMPLE_RATE // 4))
        stop = min(n, start + length)
        freq = rng.uniform(200.0, 3500.0)
        burst = np.sin(2 * np.pi * freq * t[start:stop] + rng.uniform(0, 2 * np.pi))
        noise[start:stop] += rng.uniform(0.5, 2.0) * burst * np.hanning(stop - start)
    return noise / np.sqrt(np.mean(noise ** 2))


def mix_noise(clean: np.ndarray, noise: np.ndarray, snr_db: Optional[float]) -> np.ndarray:
    """
    clean + g * noise with g = sqrt(P_clean / (P_noise * 10^(snr/10)))

    Powers are mean squares. The result is peak-normalized when any sample
    would exceed 1 in magnitude. snr_db None returns the clean signal.
    """
    clean = np.asarray(clean, dtype=np.float64)
    if snr_db is None:
        return clean.copy()
    noise = np.asarray(noise, dtype=np.float64)
    if clean.shape != noise.shape:
        raise ContractError(f"Clean and noise lengths differ: {clean.shape} vs {noise.shape}")
    p_clean = np.mean(clean ** 2)
    p_noise = np.mean(noise ** 2)
    if p_clean == 0.0:
        raise ContractError("Clean signal has zero power")
    if p_noise == 0.0:
        raise ContractError(f"Noise has zero power; cannot mix at {snr_db} dB")

    gain = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    mixed = clean + gain * noise
    peak = np.max(np.abs(mixed))
    if peak > 1.0:
        mixed = mixed / peak
    return mixed


def noise_gain(clean: np.ndarray, noise: np.ndarray, snr_db: float) -> float:
    return float(np.sqrt(np.mean(clean ** 2) / (np.mean(noise ** 2) * 10.0 ** (snr_db / 10.0))))


def aperture_track(onset: float, strength: float = 1.0, frames: int = VIDEO_FRAMES) -> np.ndarray:
    """Mouth opening per video frame: two openings spread over the wake pattern"""
    times = np.arange(frames) / VIDEO_FPS
    u = (times - onset) / WAKE_SECONDS
    inside = (u >= 0.0) & (u <= 1.0)
    return np.where(inside, strength * np.sin(2.0 * np.pi * u) ** 2, 0.0)


def canonical_aperture() -> np.ndarray:
    return aperture_track((CLIP_SECONDS - WAKE_SECONDS) / 2.0)


def render_lips(aperture: np.ndarray, rng: np.random.Generator, size: int = RAW_LIP_SIZE) -> np.ndarray:
    """Grayscale frames: skin, a lip ring and a dark mouth whose height follows aperture"""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, cx = size / 2.0, size / 2.0
    rx = 0.23 * size
    frames = np.empty((len(aperture), size, size))
    for i, a in enumerate(aperture):
        ry = 0.04 * size + 0.15 * size * a
        inner = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        outer = ((xx - cx) / (rx + 0.06 * size)) ** 2 + ((yy - cy) / (ry + 0.06 * size)) ** 2 <= 1.0
        frame = np.full((size, size), 0.6)
        frame[outer] = 0.35
        frame[inner] = 0.1
        frames[i] = frame + rng.normal(0.0, 0.02, size=(size, size))
    return np.clip(frames, 0.0, 1.0)


def synth_sample(label: int, snr_db: Optional[float], seed: int, lip_size: int = LIP_SIZE) -> Sample:
    """
    Generate one deterministic sample

    Args:
        label: 1 for wake word, 0 otherwise
        snr_db: Mixing SNR in dB, or None for clean
        seed: Generator seed; identical arguments give bitwise-identical samples
        lip_size: Side length of the preprocessed lip frames

    Returns:
        Sample with a 1.3 s clip and 32 lip frames
    """
    if label not in (0, 1):
        raise ContractError(f"Label must be 0 or 1, got {label}")
    audio_seq, noise_seq, lip_seq = np.random.SeedSequence(seed).spawn(3)
    rng = np.random.default_rng(audio_seq)

    waveform = BACKGROUND_LEVEL * pink_noise(CLIP_SAMPLES, rng)
    t = np.arange(CLIP_SAMPLES) / SAMPLE_RATE
    onset = float(rng.uniform(0.05, CLIP_SECONDS - WAKE_SECONDS - 0.05))

    if label == 1:
        start = int(onset * SAMPLE_RATE)
        waveform[start : start + WAKE_SAMPLES] += rng.uniform(0.5, 0.9) * wake_template()
    else:
        for _ in range(int(rng.integers(1, 4))):
            freq = rng.uniform(300.0, 3000.0)
            begin = int(rng.integers(0, CLIP_SAMPLES - SAMPLE_RATE // 4))
            stop = min(CLIP_SAMPLES, begin + int(rng.integers(SAMPLE_RATE // 8, SAMPLE_RATE // 2)))
            waveform[begin:stop] += rng.uniform(0.1, 0.3) * np.sin(2 * np.pi * freq * t[begin:stop]) * np.hanning(stop - begin)

    noise = babble_noise(CLIP_SAMPLES, np.random.default_rng(noise_seq))
    waveform = mix_noise(waveform, noise, snr_db)

    lip_rng = np.random.default_rng(lip_seq)
    if label == 1:
        strength = 0.4 if lip_rng.random() < WEAK_LIP_SHARE else 1.0
        aperture = aperture_track(onset, strength)
    elif lip_rng.random() < 0.5:
        aperture = np.full(VIDEO_FRAMES, lip_rng.uniform(0.0, 0.3))
    else:
        aperture = lip_rng.uniform(0.0, 0.3, size=VIDEO_FRAMES)
    lips = preprocess_lip(render_lips(aperture, lip_rng), size=lip_size)

    return Sample(
        clip=AudioClip(samples=waveform, sample_rate=SAMPLE_RATE),
        lips=lips,
        label=label,
        snr_db=snr_db,
        seed=seed,
        onset=onset,
        aperture=aperture,
    )
