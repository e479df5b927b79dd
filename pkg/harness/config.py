"""
Experiment configuration: JSON file -> nested dataclasses

Unknown keys are rejected at every level with their dotted path.
"""

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from features.fbank import FBANK_DIM, FbankSettings
from synth_corpus.corpus import CorpusSettings
from synth_corpus.generator import parse_snr
from tensor_core.errors import ConfigError
from wws_models.models import MODALITIES
from wws_models.topology import Topology

DEFAULT_LR = {"audio": 1e-4, "video": 2e-4, "av": 2e-4}
DEFAULT_BATCH = {"audio": 64, "video": 16, "av": 16}


@dataclass
class CorpusSection:
    path: str = "runs/corpus"
    counts: Dict[str, int] = field(default_factory=lambda: {"train": 2000, "dev": 400, "test": 400})
    train_snrs: List[str] = field(default_factory=lambda: ["-5", "0", "5", "clean"])
    eval_snrs: List[str] = field(default_factory=lambda: ["-5", "0", "5"])
    seed: int = 0
    lip_size: int = 88

    def settings(self) -> CorpusSettings:
        return CorpusSettings(
            counts=dict(self.counts),
            train_snrs=[parse_snr(v) for v in self.train_snrs],
            eval_snrs=[parse_snr(v) for v in self.eval_snrs],
            seed=self.seed,
            lip_size=self.lip_size,
        )


@dataclass
class FeaturesSection:
    sample_rate: int = 16000
    window_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 512
    n_mels: int = FBANK_DIM
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-10

    def settings(self) -> FbankSettings:
        return FbankSettings(**dataclasses.asdict(self))


@dataclass
class OptimizerSection:
    lr: Optional[float] = None
    batch_size: Optional[int] = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 5


@dataclass
class PruningSection:
    regime: str = "sequential"
    T: int = 21
    p: float = 0.05
    scope: str = "all"
    per_layer: bool = False
    encoder_T: Optional[int] = None
    encoder_p: Optional[float] = None
    oneshot_sparsity: Optional[float] = None


@dataclass
class ThresholdSection:
    policy: str = "calibrate"
    value: float = 0.5
    target: float = 0.97


@dataclass
class ExperimentConfig:
    modality: str = "audio"
    seed: int = 42
    corpus: CorpusSection = field(default_factory=CorpusSection)
    features: FeaturesSection = field(default_factory=FeaturesSection)
    topology: Topology = field(default_factory=Topology)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    pruning: PruningSection = field(default_factory=PruningSection)
    threshold: ThresholdSection = field(default_factory=ThresholdSection)

    @property
    def lr(self) -> float:
        return DEFAULT_LR[self.modality] if self.optimizer.lr is None else self.optimizer.lr

    @property
    def batch_size(self) -> int:
        return DEFAULT_BATCH[self.modality] if self.optimizer.batch_size is None else self.optimizer.batch_size

    def for_modality(self, modality: str) -> "ExperimentConfig":
        if modality not in MODALITIES:
            raise ConfigError(f"modality must be one of {MODALITIES}, got '{modality}'")
        return dataclasses.replace(self, modality=modality)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "ExperimentConfig":
        if self.modality not in MODALITIES:
            raise ConfigError(f"modality must be one of {MODALITIES}, got '{self.modality}'")
        self.topology.validate()
        if self.features.n_mels != FBANK_DIM:
            raise ConfigError(f"features.n_mels must be {FBANK_DIM}, got {self.features.n_mels}")
        if self.features.log_floor <= 0:
            raise ConfigError("features.log_floor must be positive")
        if self.corpus.lip_size != self.topology.encoder.frame_size:
            raise ConfigError(
                f"corpus.lip_size ({self.corpus.lip_size}) must equal topology.encoder.frame_size "
                f"({self.topology.encoder.frame_size})"
            )
        for split, count in self.corpus.counts.items():
            if split not in ("train", "dev", "test") or count < 0:
                raise ConfigError(f"corpus.counts.{split}={count} is invalid")
        for key, grid in (("train_snrs", self.corpus.train_snrs), ("eval_snrs", self.corpus.eval_snrs)):
            for value in grid:
                try:
                    snr = parse_snr(value)
                except ValueError:
                    raise ConfigError(f"corpus.{key} entry '{value}' is not a number or 'clean'")
                if snr not in (-5.0, 0.0, 5.0, None):
                    raise ConfigError(f"corpus.{key} entry '{value}' must be one of -5, 0, 5, clean")
        if self.optimizer.lr is not None and self.optimizer.lr < 0:
            raise ConfigError(f"optimizer.lr must be non-negative, got {self.optimizer.lr}")
        if self.optimizer.batch_size is not None and self.optimizer.batch_size <= 0:
            raise ConfigError(f"optimizer.batch_size must be positive, got {self.optimizer.batch_size}")
        if self.optimizer.epochs < 1:
            raise ConfigError(f"optimizer.epochs must be at least 1, got {self.optimizer.epochs}")
        pruning = self.pruning
        if pruning.regime not in ("sequential", "joint", "encoder-only"):
            raise ConfigError(f"pruning.regime must be sequential, joint or encoder-only, got '{pruning.regime}'")
        if pruning.T < 2 or (pruning.encoder_T is not None and pruning.encoder_T < 2):
            raise ConfigError("pruning.T and pruning.encoder_T must be at least 2")
        for key in ("p", "encoder_p", "oneshot_sparsity"):
            value = getattr(pruning, key)
            if value is not None and not 0.0 <= value < 1.0:
                raise ConfigError(f"pruning.{key} must be in [0, 1), got {value}")
        if self.threshold.policy not in ("calibrate", "fixed"):
            raise ConfigError(f"threshold.policy must be 'calibrate' or 'fixed', got '{self.threshold.policy}'")
        if not 0.0 < self.threshold.value < 1.0:
            raise ConfigError(f"threshold.value must be in (0, 1), got {self.threshold.value}")
        if not 0.0 <= self.threshold.target <= 1.0:
            raise ConfigError(f"threshold.target must be in [0, 1], got {self.threshold.target}")
        return self


def _coerce(value, hint, path: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)

    if dataclasses.is_dataclass(hint):
        return _build(hint, value, path)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(f"{path} must be a list, got {type(value).__name__}")
        return [_coerce(v, args[0], f"{path}[{i}]") for i, v in enumerate(value)]
    if origin in (tuple, Tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path} must be a list, got {type(value).__name__}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0], f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{path} must have {len(args)} entries, got {len(value)}")
        return tuple(_coerce(v, a, f"{path}[{i}]") for i, (v, a) in enumerate(zip(value, args)))
    if origin in (dict, Dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{path} must be an object, got {type(value).__name__}")
        return {str(k): _coerce(v, args[1], f"{path}.{k}") for k, v in value.items()}
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be true or false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, (str, int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path} must be a string, got {value!r}")
        return str(value)
    return value


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - known)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"Unknown config key(s): {', '.join(where + k for k in unknown)}")
    kwargs = {key: _coerce(value, hints[key], f"{path}.{key}" if path else key) for key, value in data.items()}
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "").validate()


def load_config(path: Optional[Path] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """
    Read and validate an experiment config

    Args:
        path: JSON file; defaults are used when None
        seed: Overrides config.seed when given

    Returns:
        Validated ExperimentConfig
    """
    data = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file {path} does not exist")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    config = config_from_dict(data)
    if seed is not None:
        config.seed = seed
    return config
