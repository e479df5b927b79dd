"""
Network dimensions for the audio, video and audio-visual classifiers
"""

from dataclasses import asdict, dataclass, field
from typing import Tuple

from tensor_core.errors import ConfigError

# (expansion t, output channels c, repeats n, first stride s)
DEFAULT_LADDER: Tuple[Tuple[int, int, int, int], ...] = (
    (1, 8, 1, 2),
    (2, 16, 2, 2),
    (2, 16, 3, 2),
    (2, 24, 4, 2),
    (2, 32, 3, 1),
)


@dataclass
class BackendTopology:
    """conv -> conv -> LSTM -> temporal mean -> FC -> sigmoid head"""

    conv_channels: Tuple[int, int] = (8, 8)
    conv_kernel: int = 3
    time_stride: int = 2
    lstm_hidden: int = 64
    fc_hidden: int = 32

    def validate(self, where: str = "topology.backend"):
        if len(self.conv_channels) != 2 or any(c <= 0 for c in self.conv_channels):
            raise ConfigError(f"{where}.conv_channels must be two positive ints, got {self.conv_channels}")
        if self.conv_kernel <= 0 or self.conv_kernel % 2 == 0:
            raise ConfigError(f"{where}.conv_kernel must be a positive odd int, got {self.conv_kernel}")
        if self.time_stride not in (1, 2):
            raise ConfigError(f"{where}.time_stride must be 1 or 2, got {self.time_stride}")
        for key in ("lstm_hidden", "fc_hidden"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{where}.{key} must be positive, got {getattr(self, key)}")


@dataclass
class EncoderTopology:
    """Stem conv, inverted-residual ladder, 1x1 conv, global average pool"""

    stem_channels: int = 8
    ladder: Tuple[Tuple[int, int, int, int], ...] = DEFAULT_LADDER
    embed_dim: int = 64
    frame_size: int = 88

    @property
    def block_count(self) -> int:
        return sum(n for _, _, n, _ in self.ladder)

    def validate(self, where: str = "topology.encoder"):
        if self.stem_channels <= 0 or self.embed_dim <= 0 or self.frame_size <= 0:
            raise ConfigError(f"{where}: stem_channels, embed_dim and frame_size must be positive")
        for row in self.ladder:
            if len(row) != 4:
                raise ConfigError(f"{where}.ladder rows must be [t, c, n, s], got {list(row)}")
            t, c, n, s = row
            if t < 1 or c <= 0 or n <= 0 or s not in (1, 2):
                raise ConfigError(f"{where}.ladder row {list(row)} is invalid")


@dataclass
class Topology:
    backend: BackendTopology = field(default_factory=BackendTopology)
    encoder: EncoderTopology = field(default_factory=EncoderTopology)
    audio_frames: int = 128
    video_frames: int = 32

    def validate(self):
        self.backend.validate()
        self.encoder.validate()
        if self.audio_frames <= 0 or self.video_frames <= 0:
            raise ConfigError("topology.audio_frames and topology.video_frames must be positive")
        if self.audio_frames % self.video_frames:
            raise ConfigError(
                f"topology.audio_frames ({self.audio_frames}) must be a multiple of video_frames ({self.video_frames})"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        backend = dict(data.get("backend", {}))
        if "conv_channels" in backend:
            backend["conv_channels"] = tuple(backend["conv_channels"])
        encoder = dict(data.get("encoder", {}))
        if "ladder" in encoder:
            encoder["ladder"] = tuple(tuple(int(v) for v in row) for row in encoder["ladder"])
        rest = {k: v for k, v in data.items() if k not in ("backend", "encoder")}
        return cls(backend=BackendTopology(**backend), encoder=EncoderTopology(**encoder), **rest)
