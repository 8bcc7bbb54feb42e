"""Game where the defender picks the defense level d and the adversary p_A.

Everything is evaluated on the piecewise-linear interpolant of tabulated
:class:`DefenseCurves`. The adversary's expected loss for attacking at level d
is ``u_attack(d) + c_A1 + c_A2 * r_J(d)``; for staying idle it is
``u_noattack(d)``. A mixed equilibrium sits where the two cross, with p_A set
so the defender's utility is stationary in d there.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .engagement import DefenseCurves, _kind

TOL = 1e-6
SWEEP_COLUMNS = (
    "c_a1",
    "d_star",
    "p_a_star",
    "kind",
    "u_def",
    "u_adv",
    "gain_vs_attack_nodef",
    "loss_vs_noattack_nodef",
)


def moving_average3(v: np.ndarray) -> np.ndarray:
    """Centered 3-point average; the end points average their two available values."""
    v = np.asarray(v, dtype=float)
    if len(v) < 3:
        return v.copy()
    out = np.empty_like(v)
    out[1:-1] = (v[:-2] + v[1:-1] + v[2:]) / 3.0
    out[0] = (v[0] + v[1]) / 2.0
    out[-1] = (v[-2] + v[-1]) / 2.0
    return out


@dataclass
class LevelGameSpec:
    curves: DefenseCurves
    reward_kind: str = "throughput"
    c_A1: float = 0.1
    c_A2: float = 0.1
    smooth: bool = False

    def __post_init__(self):
        _kind(self.reward_kind)
        if self.c_A1 < 0 or self.c_A2 < 0:
            raise ValueError("attack costs must be non-negative")
        grid = self.curves.d_grid
        ua = self.curves.u_attack(self.reward_kind)
        un = self.curves.u_noattack(self.reward_kind)
        rj = self.curves.r_J
        if self.smooth:
            ua, un, rj = moving_average3(ua), moving_average3(un), moving_average3(rj)
        self.grid, self.ua, self.un, self.rj = grid, ua, un, rj
        if len(grid) > 1:
            self.grad_ua = np.gradient(ua, grid, edge_order=1)
            self.grad_un = np.gradient(un, grid, edge_order=1)
        else:
            self.grad_ua = self.grad_un = np.zeros(1)

    def check(self, d: float) -> float:
        if not self.grid[0] <= d <= self.grid[-1]:
            raise ValueError(f"d={d} outside the tabulated range [{self.grid[0]}, {self.grid[-1]}]")
        return float(d)

    def u_attack(self, d):
        return np.interp(d, self.grid, self.ua)

    def u_noattack(self, d):
        return np.interp(d, self.grid, self.un)

    def r_J(self, d):
        return np.interp(d, self.grid, self.rj)

    def gradients(self, d: float) -> tuple[float, float]:
        """Interpolated node gradients ``(d u_attack/dd, d u_noattack/dd)``."""
        return float(np.interp(d, self.grid, self.grad_ua)), float(np.interp(d, self.grid, self.grad_un))


@dataclass
class LevelGameSolution:
    d_star: float
    p_A_star: float
    kind: str  # "interior" or "boundary"
    u_defender: float
    u_adversary: float
    kkt_multipliers: dict[str, float]
    verified: bool
    defender_gain: float
    adversary_gain: float
    residuals: dict[str, float] = field(default_factory=dict)
    diagnostics: str = ""


def utility_defender_level(spec: LevelGameSpec, d: float, p_A: float) -> float:
    d = spec.check(d)
    if not 0.0 <= p_A <= 1.0:
        raise ValueError("p_A must lie in [0, 1]")
    return float(p_A * spec.u_attack(d) + (1 - p_A) * spec.u_noattack(d))


def utility_adversary_level(spec: LevelGameSpec, d: float, p_A: float) -> float:
    attack_cost, noattack_cost = adversary_cost_curves(spec)
    d = spec.check(d)
    return float(-(p_A * attack_cost(d) + (1 - p_A) * noattack_cost(d)))


def adversary_cost_curves(spec: LevelGameSpec) -> tuple[Callable, Callable]:
    """``(attack_cost, noattack_cost)`` as functions of d (vectorised)."""

    def attack_cost(d):
        return spec.u_attack(d) + spec.c_A1 + spec.c_A2 * spec.r_J(d)

    def noattack_cost(d):
        return spec.u_noattack(d)

    return attack_cost, noattack_cost


def cost_crossings(spec: LevelGameSpec) -> list[float]:
    """Exact roots of attack_cost - noattack_cost on the piecewise-linear interpolant."""
    attack_cost, noattack_cost = adversary_cost_curves(spec)
    f = attack_cost(spec.grid) - noattack_cost(spec.grid)
    roots = []
    for i in range(len(f)):
        if f[i] == 0.0:
            roots.append(float(spec.grid[i]))
        elif i + 1 < len(f) and f[i] * f[i + 1] < 0:
            lo, hi = spec.grid[i], spec.grid[i + 1]
            roots.append(float(lo + (hi - lo) * f[i] / (f[i] - f[i + 1])))
    return roots


def _segment_allowance(spec: LevelGameSpec, d: float, p: float) -> float:
    # A point strictly inside a segment is beaten by one of its end nodes by at
    # most |slope| * length; the grid cannot resolve anything finer.
    g = spec.grid
    if len(g) == 1 or np.any(np.isclose(g, d, rtol=0, atol=1e-12)):
        return 0.0
    i = int(np.clip(np.searchsorted(g, d) - 1, 0, len(g) - 2))
    u = p * spec.ua + (1 - p) * spec.un
    return abs(u[i + 1] - u[i])


def _multipliers(spec: LevelGameSpec, d: float, p: float) -> tuple[dict, dict]:
    attack_cost, noattack_cost = adversary_cost_curves(spec)
    ga, gn = spec.gradients(d)
    grad_u_def = p * ga + (1 - p) * gn
    grad_u_adv = float(noattack_cost(d) - attack_cost(d))
    mu = {"mu_D1": 0.0, "mu_D2": 0.0, "mu_A1": 0.0, "mu_A2": 0.0}
    if d <= spec.grid[0]:
        mu["mu_D1"] = max(-grad_u_def, 0.0)
    elif d >= spec.grid[-1]:
        mu["mu_D2"] = max(grad_u_def, 0.0)
    if p == 0.0:
        mu["mu_A1"] = max(-grad_u_adv, 0.0)
    elif p == 1.0:
        mu["mu_A2"] = max(grad_u_adv, 0.0)
    residuals = {
        "defender_stationarity": -grad_u_def - mu["mu_D1"] + mu["mu_D2"],
        "adversary_stationarity": -grad_u_adv - mu["mu_A1"] + mu["mu_A2"],
        "cost_gap": -grad_u_adv,
    }
    return mu, residuals


def evaluate_candidate(spec: LevelGameSpec, d: float, p: float, kind: str, tol: float = TOL) -> LevelGameSolution:
    """Score a profile by brute-force unilateral deviations on the grid."""
    attack_cost, noattack_cost = adversary_cost_curves(spec)
    ua_att, ua_idle = -float(attack_cost(d)), -float(noattack_cost(d))
    u_adv = p * ua_att + (1 - p) * ua_idle
    adv_gain = max(max(ua_att, ua_idle) - u_adv, 0.0)
    u_def = float(p * spec.u_attack(d) + (1 - p) * spec.u_noattack(d))
    node_u = p * spec.ua + (1 - p) * spec.un
    def_gain = max(float(node_u.max()) - u_def, 0.0)
    allowance = tol + _segment_allowance(spec, d, p)
    mu, residuals = _multipliers(spec, d, p)
    verified = bool(adv_gain <= tol and def_gain <= allowance)
    diag = "" if verified else (
        f"defender gains {def_gain:.3g} (allowed {allowance:.3g}) by moving to "
        f"d={spec.grid[int(node_u.argmax())]:.4g}; adversary gains {adv_gain:.3g}"
    )
    return LevelGameSolution(
        d_star=float(d),
        p_A_star=float(p),
        kind=kind,
        u_defender=u_def,
        u_adversary=u_adv,
        kkt_multipliers=mu,
        verified=verified,
        defender_gain=def_gain,
        adversary_gain=adv_gain,
        residuals=residuals,
        diagnostics=diag,
    )


def interior_candidates(spec: LevelGameSpec) -> list[tuple[float, float]]:
    out = []
    for d in cost_crossings(spec):
        ga, gn = spec.gradients(d)
        den = gn - ga
        if abs(den) < 1e-15:
            continue
        p = gn / den
        if 0.0 <= p <= 1.0:
            out.append((d, float(p)))
    return out


def solve_level_equilibrium(spec: LevelGameSpec, tol: float = TOL) -> list[LevelGameSolution]:
    """Equilibrium candidates, verified ones first.

    Interior candidates come from the cost crossings; boundary candidates pair
    p_A in {0, 1} with d at the grid ends and at the defender's best grid level.
    More than one verified entry means several equilibria; if nothing verifies,
    the least-violating candidates are returned with diagnostics.
    """
    sols = []
    for d, p in interior_candidates(spec):
        at_edge = d in (spec.grid[0], spec.grid[-1]) or p in (0.0, 1.0)
        sols.append(evaluate_candidate(spec, d, p, "boundary" if at_edge else "interior", tol))
    seen = set()
    for p in (0.0, 1.0):
        node_u = p * spec.ua + (1 - p) * spec.un
        for d in (spec.grid[0], spec.grid[-1], spec.grid[int(node_u.argmax())]):
            if (d, p) in seen:
                continue
            seen.add((d, p))
            sols.append(evaluate_candidate(spec, float(d), p, "boundary", tol))
    sols.sort(
        key=lambda s: (
            not s.verified,
            s.kind != "interior",
            -s.u_defender if s.verified else max(s.defender_gain, s.adversary_gain),
        )
    )
    if any(s.verified for s in sols):
        return [s for s in sols if s.verified]
    return sols


def sweep_cost(spec: LevelGameSpec, c_A1_grid: Sequence[float], tol: float = TOL) -> list[dict]:
    """Solve across fixed attack costs, comparing with the undefended fixed cases."""
    grid = np.asarray(c_A1_grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("c_A1 grid must be non-negative and strictly increasing")
    rows = []
    u_att0 = float(spec.u_attack(spec.grid[0]))
    u_noatt0 = float(spec.u_noattack(spec.grid[0]))
    for c in grid:
        s = LevelGameSpec(spec.curves, spec.reward_kind, float(c), spec.c_A2, spec.smooth)
        sol = solve_level_equilibrium(s, tol)[0]
        rows.append(
            {
                "c_a1": float(c),
                "d_star": sol.d_star,
                "p_a_star": sol.p_A_star,
                "kind": sol.kind,
                "u_def": sol.u_defender,
                "u_adv": sol.u_adversary,
                "gain_vs_attack_nodef": (sol.u_defender - u_att0) / u_att0 if u_att0 else None,
                "loss_vs_noattack_nodef": (u_noatt0 - sol.u_defender) / u_noatt0 if u_noatt0 else None,
                "verified": sol.verified,
            }
        )
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return f"{v:.6g}"


def save_sweep(rows: list[dict], path: str | Path, header=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in SWEEP_COLUMNS])


def solution_report(spec: LevelGameSpec, sols: list[LevelGameSolution]) -> dict:
    return {
        "game": {
            "reward_kind": spec.reward_kind,
            "c_A1": spec.c_A1,
            "c_A2": spec.c_A2,
            "smooth": spec.smooth,
            "d_range": [float(spec.grid[0]), float(spec.grid[-1])],
        },
        "multiple": sum(s.verified for s in sols) > 1,
        "solutions": [
            {
                "d_star": s.d_star,
                "p_A_star": s.p_A_star,
                "kind": s.kind,
                "u_defender": s.u_defender,
                "u_adversary": s.u_adversary,
                "verified": s.verified,
                "defender_gain": s.defender_gain,
                "adversary_gain": s.adversary_gain,
                "multipliers": s.kkt_multipliers,
                "residuals": s.residuals,
                "diagnostics": s.diagnostics,
            }
            for s in sols
        ],
    }
