"""
Audio-only, video-only and audio-visual wake word classifiers
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from features.fbank import FBANK_DIM
from nn_layers.layers import LSTM, AvgPool, Bottleneck, Conv2d, FullyConnected, Layer, SigmoidHead
from nn_layers.registry import ParamRegistry
from tensor_core.errors import ContractError, ShapeError
from tensor_core.ops import as_tensor, relu, relu6, reshape, transpose
from tensor_core.tensor import Tensor
from wws_models.fusion import fuse
from wws_models.topology import BackendTopology, EncoderTopology, Topology

MODALITIES = ("audio", "video", "av")

CostPlan = List[Tuple[Layer, Tuple[int, ...], int]]


@dataclass
class Batch:
    """Model inputs for a group of samples"""

    labels: np.ndarray
    fbank: Optional[np.ndarray] = None
    lips: Optional[np.ndarray] = None
    snr: Optional[List[str]] = None

    def __len__(self):
        return len(self.labels)


class Backend:
    """
    Shared classifier back end over a [batch, time, width] feature sequence

    Two time-strided convs, one LSTM, temporal mean, FC with ReLU, sigmoid head.
    """

    def __init__(self, registry: ParamRegistry, prefix: str, time_steps: int, width: int,
                 topo: BackendTopology, rng: np.random.Generator):
        self.prefix = prefix
        self.time_steps = time_steps
        self.width = width
        k = topo.conv_kernel
        stride, pad = (topo.time_stride, 1), (k // 2, k // 2)
        c1, c2 = topo.conv_channels
        self.conv1 = Conv2d(registry, f"{prefix}.conv1", 1, c1, (k, k), rng, stride=stride, padding=pad)
        self.conv2 = Conv2d(registry, f"{prefix}.conv2", c1, c2, (k, k), rng, stride=stride, padding=pad)
        _, self.lstm_steps, _ = self.conv2.output_shape(self.conv1.output_shape((1, time_steps, width)))
        self.lstm = LSTM(registry, f"{prefix}.lstm", c2 * width, topo.lstm_hidden, rng)
        self.pool = AvgPool(f"{prefix}.pool", axes=(1,))
        self.fc = FullyConnected(registry, f"{prefix}.fc1", topo.lstm_hidden, topo.fc_hidden, rng)
        self.head = SigmoidHead(registry, f"{prefix}.head", topo.fc_hidden, rng)

    def __call__(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[1:] != (self.time_steps, self.width):
            raise ShapeError(
                f"{self.prefix}: expected [batch, {self.time_steps}, {self.width}], got {list(x.shape)}"
            )
        batch = x.shape[0]
        h = reshape(x, (batch, 1, self.time_steps, self.width))
        h = relu(self.conv1(h))
        h = relu(self.conv2(h))
        channels, steps = h.shape[1], h.shape[2]
        h = reshape(transpose(h, (0, 2, 1, 3)), (batch, steps, channels * self.width))
        h = self.pool(self.lstm(h))
        h = relu(self.fc(h))
        return reshape(self.head(h), (batch,))

    def cost_plan(self) -> CostPlan:
        plan, shape = [], (1, self.time_steps, self.width)
        for conv in (self.conv1, self.conv2):
            plan.append((conv, shape, 1))
            shape = conv.output_shape(shape)
        seq = (shape[1], shape[0] * shape[2])
        plan.append((self.lstm, seq, 1))
        hidden = self.lstm.output_shape(seq)
        plan.append((self.pool, hidden, 1))
        plan.append((self.fc, self.pool.output_shape(hidden), 1))
        plan.append((self.head, (self.fc.out_features,), 1))
        return plan


class LipEncoder:
    """Maps [n, 1, 88, 88] grayscale lip frames to [n, embed_dim] embeddings"""

    prefix = "lip_encoder"

    def __init__(self, registry: ParamRegistry, topo: EncoderTopology, rng: np.random.Generator):
        self.topo = topo
        self.stem = Conv2d(registry, f"{self.prefix}.stem", 1, topo.stem_channels, (3, 3), rng,
                           stride=(2, 2), padding=(1, 1))
        self.blocks: List[Bottleneck] = []
        channels = topo.stem_channels
        for t, c, n, s in topo.ladder:
            for i in range(n):
                index = len(self.blocks) + 1
                block = Bottleneck(registry, f"{self.prefix}.block{index}", channels, c, t, s if i == 0 else 1, rng)
                self.blocks.append(block)
                channels = c
        self.head_conv = Conv2d(registry, f"{self.prefix}.head_conv", channels, topo.embed_dim, (1, 1), rng)
        self.pool = AvgPool(f"{self.prefix}.pool", axes=(2, 3))

    @property
    def frame_shape(self) -> Tuple[int, int, int]:
        return (1, self.topo.frame_size, self.topo.frame_size)

    def __call__(self, frames) -> Tensor:
        frames = as_tensor(frames)
        if frames.ndim != 4 or frames.shape[1:] != self.frame_shape:
            raise ShapeError(f"lip_encoder: expected [n, {', '.join(map(str, self.frame_shape))}], got {list(frames.shape)}")
        h = relu6(self.stem(frames))
        for block in self.blocks:
            h = block(h)
        return self.pool(relu6(self.head_conv(h)))

    def cost_plan(self, repeat: int = 1) -> CostPlan:
        plan, shape = [], self.frame_shape
        for layer in [self.stem] + self.blocks + [self.head_conv]:
            plan.append((layer, shape, repeat))
            shape = layer.output_shape(shape)
        plan.append((self.pool, shape, repeat))
        return plan


class WWSModel:
    """Base class: owns the ParamRegistry and the scoring entry point"""

    modality = ""
    needs_audio = False
    needs_lips = False

    def __init__(self, topology: Optional[Topology], seed: int):
        topology = topology or Topology()
        topology.validate()
        self.topology = topology
        self.seed = seed
        self.registry = ParamRegistry()
        self.rng = np.random.default_rng(seed)

    def score(self, batch: Batch) -> Tensor:
        raise NotImplementedError

    def cost_plan(self) -> CostPlan:
        raise NotImplementedError

    def _lip_embeddings(self, lips) -> Tensor:
        lips = as_tensor(lips)
        if lips.ndim != 5:
            raise ShapeError(f"{self.modality}: expected lips [batch, time, 1, h, w], got {list(lips.shape)}")
        batch, steps = lips.shape[:2]
        flat = reshape(lips, (batch * steps,) + lips.shape[2:])
        embedded = self.encoder(flat)
        return reshape(embedded, (batch, steps, embedded.shape[1]))


class AudioModel(WWSModel):
    modality = "audio"
    needs_audio = True

    def __init__(self, topology: Optional[Topology] = None, seed: int = 0):
        super().__init__(topology, seed)
        topology = self.topology
        self.backend = Backend(self.registry, "audio", topology.audio_frames, FBANK_DIM, topology.backend, self.rng)

    @property
    def input_shape(self):
        return (self.topology.audio_frames, FBANK_DIM)

    def forward_audio(self, fbank) -> Tensor:
        fbank = as_tensor(fbank)
        if fbank.ndim == 2:
            fbank = reshape(fbank, (1,) + fbank.shape)
        if fbank.shape[-1] != FBANK_DIM:
            raise ShapeError(f"audio: expected {FBANK_DIM} FBank coefficients per frame, got {fbank.shape[-1]}")
        return self.backend(fbank)

    def score(self, batch: Batch) -> Tensor:
        return self.forward_audio(batch.fbank)

    def cost_plan(self):
        return self.backend.cost_plan()


class VideoModel(WWSModel):
    """Lip encoder and back end trained end to end"""

    modality = "video"
    needs_lips = True

    def __init__(self, topology: Optional[Topology] = None, seed: int = 0):
        super().__init__(topology, seed)
        topology = self.topology
        self.encoder = LipEncoder(self.registry, topology.encoder, self.rng)
        self.backend = Backend(
            self.registry, "video", topology.video_frames, topology.encoder.embed_dim, topology.backend, self.rng
        )

    @property
    def input_shape(self):
        return (self.topology.video_frames,) + self.encoder.frame_shape

    def forward_video(self, embeddings) -> Tensor:
        embeddings = as_tensor(embeddings)
        if embeddings.ndim == 2:
            embeddings = reshape(embeddings, (1,) + embeddings.shape)
        if embeddings.shape[-1] != self.topology.encoder.embed_dim:
            raise ShapeError(
                f"video: expected embeddings of width {self.topology.encoder.embed_dim}, got {embeddings.shape[-1]}"
            )
        return self.backend(embeddings)

    def score(self, batch: Batch) -> Tensor:
        return self.forward_video(self._lip_embeddings(batch.lips))

    def cost_plan(self):
        return self.encoder.cost_plan(repeat=self.topology.video_frames) + self.backend.cost_plan()


class AVModel(WWSModel):
    """Lip encoder, frame-repeat fusion with FBank, fusion back end"""

    modality = "av"
    needs_audio = True
    needs_lips = True

    def __init__(self, topology: Optional[Topology] = None, seed: int = 0):
        super().__init__(topology, seed)
        topology = self.topology
        self.encoder = LipEncoder(self.registry, topology.encoder, self.rng)
        self.fused_width = FBANK_DIM + topology.encoder.embed_dim
        self.backend = Backend(
            self.registry, "fusion", topology.audio_frames, self.fused_width, topology.backend, self.rng
        )

    @property
    def input_shape(self):
        return (self.topology.audio_frames, self.fused_width)

    def forward_av(self, fused) -> Tensor:
        fused = as_tensor(fused)
        if fused.ndim == 2:
            fused = reshape(fused, (1,) + fused.shape)
        if fused.shape[-1] != self.fused_width:
            raise ShapeError(f"av: expected fused width {self.fused_width}, got {fused.shape[-1]}")
        return self.backend(fused)

    def score(self, batch: Batch) -> Tensor:
        return self.forward_av(fuse(batch.fbank, self._lip_embeddings(batch.lips)))

    def cost_plan(self):
        return self.encoder.cost_plan(repeat=self.topology.video_frames) + self.backend.cost_plan()


class EncoderCostView:
    """Costs the lip encoder alone, for the per-network cost table"""

    def __init__(self, encoder: LipEncoder, frames: int):
        self.encoder = encoder
        self.frames = frames
        self.input_shape = (frames,) + encoder.frame_shape

    def cost_plan(self):
        return self.encoder.cost_plan(repeat=self.frames)


def build_model(modality: str, topology: Topology = None, seed: int = 0) -> WWSModel:
    """Construct a freshly initialized model; same (modality, topology, seed) gives identical weights"""
    topology = topology or Topology()
    models = {"audio": AudioModel, "video": VideoModel, "av": AVModel}
    if modality not in models:
        raise ContractError(f"Unknown modality '{modality}'; expected one of {MODALITIES}")
    return models[modality](topology, seed)
