"""Run configuration: one structured file covering every stage.

Defaults reproduce the reference setting (3 dB, half-time occupancy,
p_success 0.95, 1000 samples split 80/20, c_A2 = 0.1). Unknown keys are errors.

Seeds: the master seed expands by stream index,
``0`` dataset, ``1`` train/test split, ``2`` defender training,
``3`` engagement sweep (sub-streams ``(attack_on, replication)``),
``4`` fictitious-play sampling.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .classifier import TrainConfig
from .engagement import EngagementConfig
from .fictitious_play import FpConfig
from .waveform import ChannelParams, OccupancyProcess, RngSeed

STREAM_DATASET = 0
STREAM_SPLIT = 1
STREAM_TRAIN = 2
STREAM_ENGAGEMENT = 3
STREAM_FP = 4


class ConfigError(ValueError):
    pass


@dataclass
class ChannelSection:
    rayleigh_scale: float = 1.0
    snr_db: float = 3.0
    samples_per_frame: int = 16
    fading: str = "sample"


@dataclass
class DatasetSection:
    n_samples: int = 1000
    train_fraction: float = 0.8
    p_occupied: float = 0.5


@dataclass
class TrainingSection:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    weight_decay: float = 0.03
    augment: bool = True
    accuracy_gate: float = 0.95


@dataclass
class SurrogateSection:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    weight_decay: float = 0.0
    augment: bool = False


@dataclass
class EngagementSection:
    p_success: float = 0.95
    n_observe: int = 1000
    n_eval: int = 10000
    replications: int = 10
    d_start: float = 0.0
    d_stop: float = 1.0
    d_step: float = 0.05


@dataclass
class FpSection:
    rounds: int = 2000
    init_belief_D: float = 0.5
    init_belief_A: float = 0.5
    tie_break: str = "stay"
    mode: str = "strategy-average"
    window: int = 200
    eps: float = 0.05


@dataclass
class GamesSection:
    reward_kind: str = "throughput"
    d: float = 0.4
    c_A: float = 0.3
    c_A1: float = 0.1
    c_A2: float = 0.1
    c_A1_grid: list = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    smooth: bool = False
    fp: FpSection = field(default_factory=FpSection)


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    channel: ChannelSection = field(default_factory=ChannelSection)
    adversary_channel: ChannelSection = field(default_factory=ChannelSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    surrogate: SurrogateSection = field(default_factory=SurrogateSection)
    engagement: EngagementSection = field(default_factory=EngagementSection)
    games: GamesSection = field(default_factory=GamesSection)

    # stage views -------------------------------------------------------

    def rng_seed(self, stream: int) -> RngSeed:
        return RngSeed(self.seed, stream)

    def channel_params(self, adversary: bool = False) -> ChannelParams:
        return ChannelParams(**dataclasses.asdict(self.adversary_channel if adversary else self.channel))

    def occupancy(self) -> OccupancyProcess:
        return OccupancyProcess(self.dataset.p_occupied)

    def train_config(self) -> TrainConfig:
        t = dataclasses.asdict(self.training)
        t.pop("accuracy_gate")
        return TrainConfig(seed=self.rng_seed(STREAM_TRAIN), **t)

    def engagement_config(self) -> EngagementConfig:
        e = self.engagement
        return EngagementConfig(
            occ=self.occupancy(),
            ch_defender=self.channel_params(),
            ch_adversary=self.channel_params(adversary=True),
            p_success=e.p_success,
            n_observe=e.n_observe,
            n_eval=e.n_eval,
            seed=self.rng_seed(STREAM_ENGAGEMENT),
            surrogate=TrainConfig(**dataclasses.asdict(self.surrogate)),
        )

    def d_grid(self) -> np.ndarray:
        e = self.engagement
        n = int(round((e.d_stop - e.d_start) / e.d_step)) + 1
        return np.round(e.d_start + e.d_step * np.arange(n), 10)

    def fp_config(self, rounds: int | None = None) -> FpConfig:
        f = self.games.fp
        return FpConfig(
            rounds=rounds or f.rounds,
            init_belief_D=f.init_belief_D,
            init_belief_A=f.init_belief_A,
            tie_break=f.tie_break,
            mode=f.mode,
            seed=self.rng_seed(STREAM_FP),
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of everything that can change results (not paths or worker count)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def validate(self) -> RunConfig:
        try:
            self.channel_params()
            self.channel_params(adversary=True)
            self.occupancy()
            self.train_config()
            self.engagement_config()
            self.fp_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.dataset.n_samples < 2 or not 0 < self.dataset.train_fraction < 1:
            raise ConfigError("dataset needs n_samples >= 2 and train_fraction in (0, 1)")
        if self.engagement.replications < 1 or self.engagement.d_step <= 0:
            raise ConfigError("replications and d_step must be positive")
        return self


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key(s) {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for name, value in data.items():
        f = fields[name]
        sub = f.default_factory if f.default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(sub):
            kwargs[name] = _build(sub, value, f"{where}.{name}" if where else name)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data or {}, "").validate()


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(data)
