"""Defender/adversary episodes and defense-level sweeps.

An episode has two phases. While the adversary observes, the defender senses
its channel, flips a fraction ``d`` of its most confident decisions, and
transmits on the ones that end up 'idle'. The adversary records its own
received frame together with the ACK-derived label 'successful transmission'
and trains a surrogate on those pairs. During evaluation the adversary jams
whenever the surrogate predicts a success. Metrics come from evaluation only.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifier import ClassifierModel, TrainConfig, train_arrays
from .waveform import ChannelParams, OccupancyProcess, RngSeed, gen_batch

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ("d", "u_att_tpt", "u_noatt_tpt", "u_att_sr", "u_noatt_sr", "a_j", "r_j")
REWARD_KINDS = ("throughput", "success_ratio")


class CurvesFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-12))


@dataclass(frozen=True)
class EngagementConfig:
    occ: OccupancyProcess = OccupancyProcess()
    ch_defender: ChannelParams = ChannelParams()
    ch_adversary: ChannelParams = ChannelParams()
    p_success: float = 0.95
    defense_level: float = 0.0
    attack_on: bool = False
    n_observe: int = 1000
    n_eval: int = 10000
    seed: RngSeed = RngSeed(0, 3)
    surrogate: TrainConfig = TrainConfig()

    def __post_init__(self):
        if not 0.0 <= self.defense_level <= 1.0:
            raise ValueError("defense_level must lie in [0, 1]")
        if not 0.0 <= self.p_success <= 1.0:
            raise ValueError("p_success must lie in [0, 1]")
        if self.n_eval < 1:
            raise ValueError("n_eval must be positive")
        if self.attack_on and self.n_observe < 100:
            raise ValueError("the adversary needs at least 100 observations")


@dataclass(frozen=True)
class DecisionRecord:
    occupied: bool
    defender_prediction: int
    confidence: float
    transmitted: bool
    adversary_jam: bool | None
    outcome: str  # "success", "fail" or "none"


@dataclass(frozen=True)
class EngagementMetrics:
    throughput: float
    success_ratio: float
    adversary_accuracy: float | None
    jam_ratio: float
    successes: int = 0
    transmissions: int = 0


@dataclass
class DefenseCurves:
    d_grid: np.ndarray
    u_attack_throughput: np.ndarray
    u_noattack_throughput: np.ndarray
    u_attack_successratio: np.ndarray
    u_noattack_successratio: np.ndarray
    a_J: np.ndarray
    r_J: np.ndarray
    header: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name in ("d_grid", *self._value_fields()):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.d_grid)
        if n == 0:
            raise ValueError("empty defense grid")
        if any(len(getattr(self, f)) != n for f in self._value_fields()):
            raise ValueError("curve arrays must match the grid length")
        if np.any(np.diff(self.d_grid) <= 0):
            raise ValueError("d_grid must be strictly increasing")
        for name in ("d_grid", *self._value_fields()):
            v = getattr(self, name)
            if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
                raise ValueError(f"{name} values must lie in [0, 1]")

    @staticmethod
    def _value_fields():
        return (
            "u_attack_throughput",
            "u_noattack_throughput",
            "u_attack_successratio",
            "u_noattack_successratio",
            "a_J",
            "r_J",
        )

    def u_attack(self, reward_kind: str) -> np.ndarray:
        return {"throughput": self.u_attack_throughput, "success_ratio": self.u_attack_successratio}[
            _kind(reward_kind)
        ]

    def u_noattack(self, reward_kind: str) -> np.ndarray:
        return {"throughput": self.u_noattack_throughput, "success_ratio": self.u_noattack_successratio}[
            _kind(reward_kind)
        ]

    def rows(self) -> np.ndarray:
        return np.column_stack([self.d_grid, *(getattr(self, f) for f in self._value_fields())])


def _kind(reward_kind: str) -> str:
    if reward_kind not in REWARD_KINDS:
        raise ValueError(f"reward_kind must be one of {REWARD_KINDS}, got {reward_kind!r}")
    return reward_kind


def flip_mask(confidence: np.ndarray, d: float) -> np.ndarray:
    """Boolean mask of the ``round(d*n)`` most confident decisions (lowest index wins ties)."""
    if not 0.0 <= d <= 1.0:
        raise ValueError("defense level must lie in [0, 1]")
    confidence = np.asarray(confidence, dtype=float)
    k = round_half_up(d * len(confidence))
    mask = np.zeros(len(confidence), dtype=bool)
    mask[np.argsort(-confidence, kind="stable")[:k]] = True
    return mask


def apply_defense(decisions: Sequence[tuple[int, float]], d: float) -> list[int]:
    """Flip the labels of the most confident ``round(d*n)`` binary decisions."""
    if not decisions:
        return []
    labels = np.array([int(p) for p, _ in decisions])
    mask = flip_mask(np.array([c for _, c in decisions]), d)
    return np.where(mask, 1 - labels, labels).tolist()


def _sense(cfg: EngagementConfig, defender: ClassifierModel, n: int, seed: RngSeed) -> dict:
    occupied = seed.child(0).rng().random(n) < cfg.occ.p_occupied
    x_def = gen_batch(occupied, cfg.ch_defender, seed.child(1).rng())
    x_adv = gen_batch(occupied, cfg.ch_adversary, seed.child(2).rng())
    lucky = seed.child(3).rng().random(n) < cfg.p_success
    pred, conf = defender.predict_arrays(x_def)
    flipped = flip_mask(conf, cfg.defense_level)
    decision = np.where(flipped, 1 - pred, pred)
    transmitted = decision == 0
    # would succeed absent jamming
    clean_success = transmitted & ~occupied & lucky
    return dict(
        occupied=occupied,
        x_adv=x_adv,
        pred=pred,
        conf=conf,
        transmitted=transmitted,
        clean_success=clean_success,
    )


def _train_surrogate(cfg: EngagementConfig, obs: dict, seed: RngSeed) -> ClassifierModel | None:
    labels = obs["clean_success"].astype(int)
    if labels.min() == labels.max():
        logger.warning("surrogate training set has a single class; adversary will never jam")
        return None
    return train_arrays(obs["x_adv"], labels, replace(cfg.surrogate, seed=seed))


def _episode(cfg: EngagementConfig, defender: ClassifierModel) -> tuple[EngagementMetrics, dict]:
    surrogate = None
    if cfg.attack_on:
        observed = _sense(cfg, defender, cfg.n_observe, cfg.seed.child(1))
        surrogate = _train_surrogate(cfg, observed, cfg.seed.child(2))
    ev = _sense(cfg, defender, cfg.n_eval, cfg.seed.child(3))
    if surrogate is not None:
        jam = surrogate.predict_arrays(ev["x_adv"])[0] == 1
    else:
        jam = np.zeros(cfg.n_eval, dtype=bool)
    success = ev["clean_success"] & ~jam
    n_succ = int(success.sum())
    n_tx = int(ev["transmitted"].sum())
    metrics = EngagementMetrics(
        throughput=n_succ / cfg.n_eval,
        success_ratio=n_succ / n_tx if n_tx else 0.0,
        adversary_accuracy=float(np.mean(jam == ev["clean_success"])) if cfg.attack_on else None,
        jam_ratio=float(np.mean(jam)),
        successes=n_succ,
        transmissions=n_tx,
    )
    ev["jam"] = jam
    ev["success"] = success
    return metrics, ev


def run_episode(cfg: EngagementConfig, defender: ClassifierModel) -> tuple[EngagementMetrics, list[DecisionRecord]]:
    metrics, ev = _episode(cfg, defender)
    records = []
    for k in range(cfg.n_eval):
        tx = bool(ev["transmitted"][k])
        outcome = "none" if not tx else ("success" if ev["success"][k] else "fail")
        records.append(
            DecisionRecord(
                occupied=bool(ev["occupied"][k]),
                defender_prediction=int(ev["pred"][k]),
                confidence=float(ev["conf"][k]),
                transmitted=tx,
                adversary_jam=bool(ev["jam"][k]) if cfg.attack_on else None,
                outcome=outcome,
            )
        )
    return metrics, records


def episode_metrics(cfg: EngagementConfig, defender: ClassifierModel) -> EngagementMetrics:
    """Like :func:`run_episode` without materialising the per-instance log."""
    return _episode(cfg, defender)[0]


def _episode_job(args):
    cfg, defender = args
    return episode_metrics(cfg, defender)


def sweep_defense(
    template: EngagementConfig,
    d_grid: Sequence[float],
    defender: ClassifierModel,
    replications: int = 10,
    workers: int = 1,
) -> DefenseCurves:
    """Average episode metrics over ``replications`` at each defense level.

    Replication ``r`` of attack mode ``a`` uses seed ``template.seed.child(a, r)``
    at every grid point (common random numbers across ``d``), so curve shapes
    are not masked by independent noise between neighbouring levels.
    """
    d_grid = np.asarray(d_grid, dtype=float)
    if d_grid.size == 0:
        raise ValueError("empty defense grid")
    if np.any(d_grid < 0) or np.any(d_grid > 1) or np.any(np.diff(d_grid) <= 0):
        raise ValueError("d_grid must be strictly increasing within [0, 1]")
    if replications < 1:
        raise ValueError("replications must be positive")
    jobs = []
    for d in d_grid:
        for attack in (True, False):
            for rep in range(replications):
                cfg = replace(
                    template,
                    defense_level=float(d),
                    attack_on=attack,
                    seed=template.seed.child(int(attack), rep),
                )
                jobs.append((cfg, defender))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_episode_job, jobs, chunksize=1))
    else:
        results = [_episode_job(j) for j in jobs]
    res = iter(results)
    cols = {f: [] for f in DefenseCurves._value_fields()}
    for _ in d_grid:
        att = [next(res) for _ in range(replications)]
        noatt = [next(res) for _ in range(replications)]
        cols["u_attack_throughput"].append(np.mean([m.throughput for m in att]))
        cols["u_noattack_throughput"].append(np.mean([m.throughput for m in noatt]))
        cols["u_attack_successratio"].append(np.mean([m.success_ratio for m in att]))
        cols["u_noattack_successratio"].append(np.mean([m.success_ratio for m in noatt]))
        cols["a_J"].append(np.mean([m.adversary_accuracy for m in att]))
        cols["r_J"].append(np.mean([m.jam_ratio for m in att]))
    return DefenseCurves(d_grid, **cols)


def save_curves(curves: DefenseCurves, path: str | Path, header: Sequence[str] = ()) -> None:
    """Write the curves CSV. ``header`` lines are emitted as ``# ...`` comments."""
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for row in curves.rows():
            w.writerow([repr(float(v)) for v in row])


def load_curves(path: str | Path) -> DefenseCurves:
    header_lines, rows, seen_header = [], [], False
    prev_d = -math.inf
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                header_lines.append(text[1:].strip())
                continue
            fields = [f.strip() for f in text.split(",")]
            if not seen_header:
                if tuple(fields) != CURVE_COLUMNS:
                    raise CurvesFormatError(f"expected header {','.join(CURVE_COLUMNS)}", lineno)
                seen_header = True
                continue
            if len(fields) != len(CURVE_COLUMNS):
                raise CurvesFormatError(f"expected {len(CURVE_COLUMNS)} fields, got {len(fields)}", lineno)
            try:
                vals = [float(f) for f in fields]
            except ValueError:
                raise CurvesFormatError("non-numeric or empty field", lineno) from None
            if not all(math.isfinite(v) and 0.0 <= v <= 1.0 for v in vals):
                raise CurvesFormatError("values must lie in [0, 1]", lineno)
            if vals[0] <= prev_d:
                raise CurvesFormatError("d column must be strictly increasing", lineno)
            prev_d = vals[0]
            rows.append(vals)
    if not seen_header:
        raise CurvesFormatError("missing header row")
    if not rows:
        raise CurvesFormatError("no data rows")
    a = np.array(rows)
    return DefenseCurves(*(a[:, k] for k in range(a.shape[1])), header=header_lines)
