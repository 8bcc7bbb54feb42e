import numpy as np
import pytest

from amlgame.engagement import DefenseCurves
from amlgame.level_game import (
    SWEEP_COLUMNS,
    LevelGameSpec,
    adversary_cost_curves,
    cost_crossings,
    moving_average3,
    save_sweep,
    solve_level_equilibrium,
    sweep_cost,
    utility_adversary_level,
    utility_defender_level,
)
from conftest import quadratic_curves


def steeper_curves(step=0.01):
    # same shape with u_noattack = 0.5 - 0.4 d; the cost gap is then
    # -(1.2 d^2 - 1.5 d + 0.35), root (1.5 - sqrt(0.57)) / 2.4
    c = quadratic_curves(step)
    un = 0.5 - 0.4 * c.d_grid
    return DefenseCurves(c.d_grid, c.u_attack_throughput, un, c.u_attack_successratio, un, c.a_J, c.r_J)


STEEP_D = (1.5 - np.sqrt(0.57)) / 2.4
STEEP_P = 0.4 / (0.4 + 1.2 * (1 - 2 * STEEP_D))


def test_utilities():
    s = LevelGameSpec(quadratic_curves(), c_A1=0.1, c_A2=0.1)
    assert utility_defender_level(s, 0.3, 0.0) == pytest.approx(0.5 - 0.06)
    assert utility_defender_level(s, 0.0, 1.0) == 0.0
    assert utility_defender_level(s, 0.3, 0.5) == pytest.approx(0.5 * (1.2 * 0.21 + 0.44))
    attack, idle = adversary_cost_curves(s)
    assert attack(0.0) == pytest.approx(0.0 + 0.1 + 0.1 * 1.0)
    assert utility_adversary_level(s, 0.0, 0.0) == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        utility_defender_level(s, 1.2, 0.5)
    with pytest.raises(ValueError):
        LevelGameSpec(quadratic_curves(), c_A1=-1)


def test_zero_costs_reduce_to_attack_curve():
    s = LevelGameSpec(quadratic_curves(), c_A1=0.0, c_A2=0.0)
    attack, _ = adversary_cost_curves(s)
    assert np.allclose(attack(s.grid), s.ua)


def test_steeper_quadratic_closed_form():
    s = LevelGameSpec(steeper_curves(0.001), c_A1=0.05, c_A2=0.1)
    sol = solve_level_equilibrium(s)[0]
    assert sol.kind == "interior" and sol.verified
    assert sol.d_star == pytest.approx(STEEP_D, abs=1e-4)
    assert sol.p_A_star == pytest.approx(STEEP_P, abs=1e-3)
    assert abs(sol.residuals["cost_gap"]) <= 1e-6
    assert abs(sol.residuals["defender_stationarity"]) <= 1e-6
    assert sol.u_adversary == pytest.approx(-float(s.u_noattack(sol.d_star)), abs=1e-9)


def test_literal_quadratic_set():
    # u_noattack = 0.5 - 0.2 d: the gap 1.2 d^2 - 1.3 d + 0.35 has roots 0.5 and 7/12;
    # at 0.5 the attack curve is flat so p_A* = 1, at 7/12 the gradients coincide
    s = LevelGameSpec(quadratic_curves(), c_A1=0.05, c_A2=0.1)
    assert cost_crossings(s) == pytest.approx([0.5, 7 / 12], abs=1e-3)
    sols = solve_level_equilibrium(s)
    assert all(x.verified for x in sols)
    assert (sols[0].d_star, sols[0].p_A_star) == pytest.approx((0.5, 1.0))


def test_grid_refinement_stability():
    coarse = solve_level_equilibrium(LevelGameSpec(steeper_curves(0.02), c_A1=0.05, c_A2=0.1))[0]
    fine = solve_level_equilibrium(LevelGameSpec(steeper_curves(0.01), c_A1=0.05, c_A2=0.1))[0]
    assert abs(coarse.d_star - fine.d_star) <= 0.02


def test_prohibitive_fixed_cost():
    s = LevelGameSpec(quadratic_curves(), c_A1=0.6, c_A2=0.1)
    assert cost_crossings(s) == []
    sol = solve_level_equilibrium(s)[0]
    assert (sol.d_star, sol.p_A_star, sol.kind, sol.verified) == (0.0, 0.0, "boundary", True)
    assert sol.kkt_multipliers["mu_D1"] == pytest.approx(0.2)
    assert sol.kkt_multipliers["mu_A1"] > 0


def test_brute_force_over_profile_grid():
    s = LevelGameSpec(steeper_curves(), c_A1=0.05, c_A2=0.1)
    sol = solve_level_equilibrium(s)[0]
    p = np.linspace(0, 1, 1001)
    attack, idle = adversary_cost_curves(s)
    adv = -(p * attack(sol.d_star) + (1 - p) * idle(sol.d_star))
    assert adv.max() - sol.u_adversary <= 1e-9
    d_fine = np.linspace(0, 1, 1001)
    u = sol.p_A_star * s.u_attack(d_fine) + (1 - sol.p_A_star) * s.u_noattack(d_fine)
    # piecewise-linear interpolation error of the concave quadratic: 1.2 * h^2 / 8
    assert u.max() - sol.u_defender <= 1.2 * 0.01**2 / 8 + 1e-9


def test_smoothing():
    v = np.array([0.0, 3.0, 0.0, 3.0])
    assert moving_average3(v).tolist() == [1.5, 1.0, 2.0, 1.5]
    s = LevelGameSpec(quadratic_curves(), c_A1=0.05, c_A2=0.1, smooth=True)
    assert s.ua[0] != 0.0


def test_sweep_cost(tmp_path):
    s = LevelGameSpec(steeper_curves(), c_A1=0.05, c_A2=0.1)
    rows = sweep_cost(s, [0.0, 0.05, 0.1, 0.5])
    direct = solve_level_equilibrium(s)[0]
    assert rows[1]["d_star"] == direct.d_star and rows[1]["p_a_star"] == direct.p_A_star
    d = [r["d_star"] for r in rows]
    assert all(b <= a + 1e-12 for a, b in zip(d, d[1:]))
    assert rows[-1]["p_a_star"] == 0.0
    with pytest.raises(ValueError):
        sweep_cost(s, [0.2, 0.1])
    p = tmp_path / "sweep.csv"
    save_sweep(rows, p, ["h"])
    assert p.read_text().splitlines()[1] == ",".join(SWEEP_COLUMNS)
