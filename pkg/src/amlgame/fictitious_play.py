"""Fictitious play on the 2x2 defend/attack game.

Each round both players best-respond to the running average of the opponent's
past plays. The initial belief counts as one prior play, so after round ``t``
the average is ``(prior + sum of plays) / (t + 1)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matrix_game import (
    MatrixGame,
    MixedProfile,
    best_response,
    deviation_gains,
    utility_adversary,
    utility_defender,
)
from .waveform import RngSeed

TIE_BREAKS = ("stay", "zero", "one", "interval-midpoint")
MODES = ("strategy-average", "sampled-action-average")
TRACE_COLUMNS = ("t", "belief_pD", "belief_pA", "play_pD", "play_pA", "u_def", "u_adv")


@dataclass(frozen=True)
class FpConfig:
    rounds: int = 2000
    init_belief_D: float = 0.5
    init_belief_A: float = 0.5
    tie_break: str = "stay"
    mode: str = "strategy-average"
    seed: RngSeed = RngSeed(0, 4)

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        for v in (self.init_belief_D, self.init_belief_A):
            if not 0.0 <= v <= 1.0:
                raise ValueError("initial beliefs must lie in [0, 1]")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class FpTrace:
    """Per-round log. ``belief_*[t]`` is the average each player responded to in round t+1."""

    game: MatrixGame
    config: FpConfig
    belief_pD: np.ndarray
    belief_pA: np.ndarray
    play_pD: np.ndarray
    play_pA: np.ndarray
    action_D: np.ndarray
    action_A: np.ndarray
    u_def: np.ndarray
    u_adv: np.ndarray
    final_belief: MixedProfile = field(default=None)

    def __len__(self):
        return len(self.play_pD)

    def averages(self) -> tuple[np.ndarray, np.ndarray]:
        """Running averages after each round (prior included)."""
        t = np.arange(1, len(self) + 1)
        avg_d = (self.config.init_belief_D + np.cumsum(self.action_D)) / (t + 1)
        avg_a = (self.config.init_belief_A + np.cumsum(self.action_A)) / (t + 1)
        return avg_d, avg_a


def _choose(interval: tuple[float, float], tie_break: str, previous: float) -> float:
    lo, hi = interval
    if lo == hi:
        return lo
    if tie_break == "stay":
        return previous
    if tie_break == "zero":
        return lo
    if tie_break == "one":
        return hi
    return 0.5 * (lo + hi)


def run_fp(g: MatrixGame, cfg: FpConfig) -> FpTrace:
    rng = cfg.seed.rng() if cfg.mode == "sampled-action-average" else None
    n = cfg.rounds
    cols = {k: np.empty(n) for k in ("bD", "bA", "pD", "pA", "aD", "aA", "uD", "uA")}
    sum_d, sum_a = cfg.init_belief_D, cfg.init_belief_A
    # the prior acts as the round-0 play for the 'stay' rule
    prev_d, prev_a = cfg.init_belief_D, cfg.init_belief_A
    for t in range(n):
        belief_d, belief_a = sum_d / (t + 1), sum_a / (t + 1)
        play_d = _choose(best_response(g, "defender", belief_a), cfg.tie_break, prev_d)
        play_a = _choose(best_response(g, "adversary", belief_d), cfg.tie_break, prev_a)
        if rng is not None:
            act_d, act_a = float(rng.random() < play_d), float(rng.random() < play_a)
        else:
            act_d, act_a = play_d, play_a
        s = MixedProfile(play_d, play_a)
        cols["bD"][t], cols["bA"][t] = belief_d, belief_a
        cols["pD"][t], cols["pA"][t] = play_d, play_a
        cols["aD"][t], cols["aA"][t] = act_d, act_a
        cols["uD"][t], cols["uA"][t] = utility_defender(g, s), utility_adversary(g, s)
        sum_d += act_d
        sum_a += act_a
        prev_d, prev_a = play_d, play_a
    return FpTrace(
        game=g,
        config=cfg,
        belief_pD=cols["bD"],
        belief_pA=cols["bA"],
        play_pD=cols["pD"],
        play_pA=cols["pA"],
        action_D=cols["aD"],
        action_A=cols["aA"],
        u_def=cols["uD"],
        u_adv=cols["uA"],
        final_belief=MixedProfile(sum_d / (n + 1), sum_a / (n + 1)),
    )


def convergence_check(trace: FpTrace, window: int, eps: float) -> MixedProfile | None:
    """Final average profile if it has settled and passes the equilibrium test.

    Settled means both running averages stayed strictly within ``eps`` of their
    final values over the last ``window`` rounds; the equilibrium test requires
    every unilateral deviation gain to be at most ``eps``.
    """
    if not 1 <= window <= len(trace):
        raise ValueError("window must lie in [1, rounds]")
    avg_d, avg_a = trace.averages()
    drift = max(
        np.max(np.abs(avg_d[-window:] - avg_d[-1])),
        np.max(np.abs(avg_a[-window:] - avg_a[-1])),
    )
    if not drift < eps:
        return None
    profile = MixedProfile(float(avg_d[-1]), float(avg_a[-1]))
    if max(deviation_gains(trace.game, profile)) > eps:
        return None
    return profile


def save_trace(trace: FpTrace, path: str | Path, header=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for k in range(len(trace)):
            w.writerow(
                [k + 1]
                + [
                    f"{v:.6g}"
                    for v in (
                        trace.belief_pD[k],
                        trace.belief_pA[k],
                        trace.play_pD[k],
                        trace.play_pA[k],
                        trace.u_def[k],
                        trace.u_adv[k],
                    )
                ]
            )
