"""The 2x2 defend/attack game with a fixed defense level.

Defender utilities are indexed ``u_<S_D>_<S_A>`` where ``D``/``nD`` are defend /
no defend and ``A``/``nA`` attack / no attack. The adversary receives the
negated defender reward and pays ``c_A`` whenever it attacks.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .engagement import DefenseCurves, _kind

EQ_TOL = 1e-9
INDIFF_TOL = 1e-12
PLAYERS = ("defender", "adversary")


@dataclass(frozen=True)
class MatrixGame:
    u_D_A: float
    u_D_nA: float
    u_nD_A: float
    u_nD_nA: float
    c_A: float = 0.0
    reward_kind: str = "throughput"
    d: float | None = None

    def __post_init__(self):
        if self.c_A < 0:
            raise ValueError("attack cost must be non-negative")
        _kind(self.reward_kind)

    @property
    def entries(self) -> tuple[float, float, float, float]:
        return (self.u_D_A, self.u_D_nA, self.u_nD_A, self.u_nD_nA)


@dataclass(frozen=True)
class MixedProfile:
    p_D: float
    p_A: float

    def __post_init__(self):
        for name in ("p_D", "p_A"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class EquilibriumCertificate:
    profile: MixedProfile
    kind: str  # "pure", "mixed-interior" or "boundary"
    kkt_multipliers: dict[str, float]
    max_deviation_gain: float
    u_defender: float = 0.0
    u_adversary: float = 0.0


class EquilibriumSet(list):
    """List of certificates plus a flag for games with vanishing denominators."""

    degenerate: bool = False

    def __init__(self, items=(), degenerate: bool = False):
        super().__init__(items)
        self.degenerate = degenerate


def from_curves(curves: DefenseCurves, d: float, reward_kind: str, c_A: float) -> MatrixGame:
    lo, hi = curves.d_grid[0], curves.d_grid[-1]
    if not lo <= d <= hi:
        raise ValueError(f"d={d} outside the tabulated range [{lo}, {hi}]")
    if lo != 0.0:
        raise ValueError("curves must include d = 0 for the no-defense entries")
    ua, un = curves.u_attack(reward_kind), curves.u_noattack(reward_kind)
    return MatrixGame(
        u_D_A=float(np.interp(d, curves.d_grid, ua)),
        u_D_nA=float(np.interp(d, curves.d_grid, un)),
        u_nD_A=float(ua[0]),
        u_nD_nA=float(un[0]),
        c_A=c_A,
        reward_kind=reward_kind,
        d=d,
    )


def utility_defender(g: MatrixGame, s: MixedProfile) -> float:
    return s.p_D * (s.p_A * g.u_D_A + (1 - s.p_A) * g.u_D_nA) + (1 - s.p_D) * (
        s.p_A * g.u_nD_A + (1 - s.p_A) * g.u_nD_nA
    )


def utility_adversary(g: MatrixGame, s: MixedProfile) -> float:
    attack = s.p_D * -g.u_D_A + (1 - s.p_D) * -g.u_nD_A - g.c_A
    idle = s.p_D * -g.u_D_nA + (1 - s.p_D) * -g.u_nD_nA
    return s.p_A * attack + (1 - s.p_A) * idle


def defender_slope(g: MatrixGame, p_A: float) -> float:
    """d u_D / d p_D at adversary strategy ``p_A`` (constant in p_D)."""
    return p_A * (g.u_D_A - g.u_nD_A) + (1 - p_A) * (g.u_D_nA - g.u_nD_nA)


def adversary_slope(g: MatrixGame, p_D: float) -> float:
    """d u_A / d p_A at defender strategy ``p_D`` (constant in p_A)."""
    attack = p_D * -g.u_D_A + (1 - p_D) * -g.u_nD_A - g.c_A
    idle = p_D * -g.u_D_nA + (1 - p_D) * -g.u_nD_nA
    return attack - idle


def best_response(g: MatrixGame, player: str, opponent_prob: float) -> tuple[float, float]:
    """Optimal own probabilities as a closed interval ``(lo, hi)``.

    ``(0, 0)`` and ``(1, 1)`` are the pure answers; ``(0, 1)`` means indifference.
    """
    if not 0.0 <= opponent_prob <= 1.0:
        raise ValueError("opponent probability must lie in [0, 1]")
    if player == "defender":
        slope = defender_slope(g, opponent_prob)
    elif player == "adversary":
        slope = adversary_slope(g, opponent_prob)
    else:
        raise ValueError(f"player must be one of {PLAYERS}")
    if abs(slope) <= INDIFF_TOL:
        return (0.0, 1.0)
    return (1.0, 1.0) if slope > 0 else (0.0, 0.0)


def deviation_gains(g: MatrixGame, s: MixedProfile) -> tuple[float, float]:
    """Best unilateral improvement for (defender, adversary); pure deviations suffice."""
    ud = utility_defender(g, s)
    ua = utility_adversary(g, s)
    gd = max(utility_defender(g, MixedProfile(p, s.p_A)) for p in (0.0, 1.0)) - ud
    ga = max(utility_adversary(g, MixedProfile(s.p_D, p)) for p in (0.0, 1.0)) - ua
    return max(gd, 0.0), max(ga, 0.0)


def kkt_multipliers(g: MatrixGame, s: MixedProfile) -> dict[str, float]:
    """Multipliers for -grad u_i - mu_i1 + mu_i2 = 0 with g1 = -p, g2 = p - 1."""
    out = {}
    for tag, p, slope in (
        ("D", s.p_D, defender_slope(g, s.p_A)),
        ("A", s.p_A, adversary_slope(g, s.p_D)),
    ):
        if p == 0.0:
            out[f"mu_{tag}1"], out[f"mu_{tag}2"] = max(-slope, 0.0), 0.0
        elif p == 1.0:
            out[f"mu_{tag}1"], out[f"mu_{tag}2"] = 0.0, max(slope, 0.0)
        else:
            out[f"mu_{tag}1"], out[f"mu_{tag}2"] = 0.0, 0.0
    return out


def certify(g: MatrixGame, s: MixedProfile, kind: str | None = None) -> EquilibriumCertificate:
    gd, ga = deviation_gains(g, s)
    if kind is None:
        pure = s.p_D in (0.0, 1.0) and s.p_A in (0.0, 1.0)
        interior = 0.0 < s.p_D < 1.0 and 0.0 < s.p_A < 1.0
        kind = "pure" if pure else ("mixed-interior" if interior else "boundary")
    return EquilibriumCertificate(
        profile=s,
        kind=kind,
        kkt_multipliers=kkt_multipliers(g, s),
        max_deviation_gain=max(gd, ga),
        u_defender=utility_defender(g, s),
        u_adversary=utility_adversary(g, s),
    )


def mixed_candidate(g: MatrixGame) -> tuple[float, float] | None:
    """Joint indifference point ``(p_D, p_A)``, or None when a denominator vanishes.

    Defender indifference fixes p_A; the adversary's stationarity (derivative of
    its expected utility in p_A, cost included) fixes p_D.
    """
    den_a = g.u_D_A - g.u_nD_A + g.u_nD_nA - g.u_D_nA
    den_d = g.u_nD_A - g.u_nD_nA - g.u_D_A + g.u_D_nA
    if abs(den_a) <= INDIFF_TOL or abs(den_d) <= INDIFF_TOL:
        return None
    p_A = (g.u_nD_nA - g.u_D_nA) / den_a
    p_D = (g.u_nD_A - g.u_nD_nA + g.c_A) / den_d
    return p_D, p_A


def _edge_candidates(g: MatrixGame) -> list[MixedProfile]:
    # One player indifferent at the other's pure action: the indifferent
    # player can sit anywhere on that edge; the threshold where the other
    # player's best response switches is the extra candidate.
    out = []
    for p_A in (0.0, 1.0):
        if abs(defender_slope(g, p_A)) <= INDIFF_TOL:
            den = adversary_slope(g, 1.0) - adversary_slope(g, 0.0)
            if abs(den) > INDIFF_TOL:
                p_D = -adversary_slope(g, 0.0) / den
                if 0.0 <= p_D <= 1.0:
                    out.append(MixedProfile(p_D, p_A))
    for p_D in (0.0, 1.0):
        if abs(adversary_slope(g, p_D)) <= INDIFF_TOL:
            den = defender_slope(g, 1.0) - defender_slope(g, 0.0)
            if abs(den) > INDIFF_TOL:
                p_A = -defender_slope(g, 0.0) / den
                if 0.0 <= p_A <= 1.0:
                    out.append(MixedProfile(p_D, p_A))
    return out


def nash_equilibria(g: MatrixGame, tol: float = EQ_TOL) -> EquilibriumSet:
    """All isolated equilibria, verified and sorted by defender utility (descending)."""
    candidates = [MixedProfile(a, b) for a in (0.0, 1.0) for b in (0.0, 1.0)]
    mixed = mixed_candidate(g)
    degenerate = mixed is None
    if mixed is not None:
        p_D, p_A = mixed
        if 0.0 <= p_D <= 1.0 and 0.0 <= p_A <= 1.0:
            candidates.append(MixedProfile(p_D, p_A))
    candidates += _edge_candidates(g)
    found: list[EquilibriumCertificate] = []
    for s in candidates:
        if any(abs(s.p_D - c.profile.p_D) <= 1e-12 and abs(s.p_A - c.profile.p_A) <= 1e-12 for c in found):
            continue
        cert = certify(g, s)
        if cert.max_deviation_gain <= tol:
            found.append(cert)
    found.sort(key=lambda c: (-c.u_defender, c.profile.p_D, c.profile.p_A))
    return EquilibriumSet(found, degenerate=degenerate)


FIXED_REGIMES = {
    "attack+defense": "u_D_A",
    "attack+no_defense": "u_nD_A",
    "no_attack+defense": "u_D_nA",
    "no_attack+no_defense": "u_nD_nA",
}


def gain_loss_report(g: MatrixGame, eq: EquilibriumCertificate) -> dict[str, float | None]:
    """Relative change ``(u_eq - u_fixed) / u_fixed`` against each fixed regime.

    Positive values are gains; negative values are losses. A zero fixed utility
    gives ``None``.
    """
    u_eq = utility_defender(g, eq.profile)
    out = {}
    for name, attr in FIXED_REGIMES.items():
        u_fixed = getattr(g, attr)
        out[name] = None if u_fixed == 0 else (u_eq - u_fixed) / u_fixed
    return out


def equilibrium_report(g: MatrixGame, eqs: list[EquilibriumCertificate]) -> dict:
    """JSON-ready summary of a solved game."""
    return {
        "game": asdict(g),
        "degenerate": bool(getattr(eqs, "degenerate", False)),
        "equilibria": [
            {
                "p_D": c.profile.p_D,
                "p_A": c.profile.p_A,
                "kind": c.kind,
                "u_defender": c.u_defender,
                "u_adversary": c.u_adversary,
                "max_deviation_gain": c.max_deviation_gain,
                "multipliers": c.kkt_multipliers,
            }
            for c in eqs
        ],
        "gain_loss": gain_loss_report(g, eqs[0]) if eqs else {},
    }
