import dataclasses
import math

import numpy as np
import pytest

import switchgrowth as sg
from switchgrowth import analytic as an
from switchgrowth.solver import hamiltonian, switch_obstacle
from conftest import K12, KD12, KD23, Q1, benchmark_problem, THREE_REGIMES

PASTE_DEFECT = ("the closed-form benchmark pastes stay-forever values at their "
                "crossing k12, but the costless-switching optimum switches at "
                "the production crossing k=2.5 and exceeds the paste by ~15%; "
                "see notes/decisions.md")


def rel_sup(a, b):
    return float(np.max(np.abs(a - b) / np.abs(b)))


# -- grid / config -----------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ValueError):
        sg.Grid(0.0, 6.0, 101)
    with pytest.raises(ValueError):
        sg.Grid(1.0, 0.5, 101)
    with pytest.raises(ValueError):
        sg.Grid(0.1, 6.0, 2)
    g = sg.Grid(0.01, 6.0, 4001)
    assert g.h == pytest.approx(5.99 / 4000)
    nodes = g.nodes
    assert nodes[0] == 0.01 and nodes[-1] == 6.0 and np.all(np.diff(nodes) > 0)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        sg.SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        sg.SolverConfig(consumption_mode="magic")
    with pytest.raises(ValueError):
        sg.SolverConfig(consumption_mode="grid-search", n_c=1)
    with pytest.raises(ValueError):
        sg.SolverConfig(damping=0.0)


# -- hamiltonian -------------------------------------------------------------

def test_hamiltonian_unit_slope(bench):
    # resource term vanishes at the regime-1 origin: value = gamma/(1-gamma), c* = 1
    value, c = hamiltonian(bench, 1, 0.0, 1.0)
    assert c == pytest.approx(1.0)
    assert value == pytest.approx(-2.0)


def test_hamiltonian_nonpositive_slope_clamps(bench):
    cfg = sg.SolverConfig(c_floor=1e-10)
    value, c = hamiltonian(bench, 1, 1.0, -2.0, cfg)
    assert c == cfg.c_floor
    value0, c0 = hamiltonian(bench, 1, 1.0, 0.0, cfg)
    assert c0 == cfg.c_floor


def test_hamiltonian_grid_search_matches_closed_form(bench):
    rng = np.random.default_rng(3)
    gs = sg.SolverConfig(consumption_mode="grid-search", n_c=20001)
    for _ in range(40):
        k = rng.uniform(0.1, 2.0)
        slope = rng.uniform(1.0, 3.0)
        v_cf, c_cf = hamiltonian(bench, 1, k, slope)
        v_gs, c_gs = hamiltonian(bench, 1, k, slope, gs)
        assert v_gs == pytest.approx(v_cf, rel=1e-4)
        assert v_gs <= v_cf + 1e-12  # brute force cannot beat the exact argmax


# -- switch obstacle -----------------------------------------------------------

def test_switch_obstacle_basic():
    costs = sg.SwitchingCostMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    value, target = switch_obstacle([-10.0, -5.0], 1, costs)
    assert value == pytest.approx(-6.0) and target == 2


def test_switch_obstacle_tie_break():
    costs = sg.SwitchingCostMatrix.vanishing(3)
    value, target = switch_obstacle([-10.0, -5.0, -5.0], 1, costs)
    assert value == pytest.approx(-5.0) and target == 2  # smallest index wins


def test_switch_obstacle_single_regime():
    costs = sg.SwitchingCostMatrix.vanishing(1)
    value, target = switch_obstacle([-3.0], 1, costs)
    assert value is an.MINUS_INF and target is None


# -- single-regime accuracy (closed form is exact here) ------------------------

def test_single_regime_matches_stay_value():
    p = benchmark_problem(regimes=((0.2, 0.0),))
    sol = sg.solve_vanishing(p, sg.Grid(0.01, 6.0, 4001))
    assert sol.converged
    k = sol.grid.nodes
    mask = (k >= 0.1) & (k <= 5.0)
    v_exact = Q1 / k[mask]
    assert rel_sup(sol.v[mask], v_exact) <= 1e-3
    assert np.all(sol.active == 1)
    regions = sg.extract_regions(sol)
    assert regions.switch_pieces(1) == ()
    assert regions.continuation(1)[0] == (0.0, math.inf)


# -- pooled two-regime solve ---------------------------------------------------

def test_vanishing_matches_independent_ode_reference(sol_vanishing_4001,
                                                     ode_reference_4001, bench):
    k_ref, v_ref = ode_reference_4001
    k = sol_vanishing_4001.grid.nodes
    h = sol_vanishing_4001.grid.h
    mask = (k >= 0.1) & (k <= 5.0)
    sel = (np.abs(k[mask] - 1.0) > h) & (np.abs(k[mask] - KD12) > h)
    assert np.allclose(k[mask], k_ref)
    err = rel_sup(sol_vanishing_4001.v[mask][sel], v_ref[sel])
    assert err <= 1e-3, f"pooled solve vs ODE reference: sup rel err {err:.2e}"


def test_vanishing_flip_at_production_crossing(sol_vanishing_4001,
                                               sol_vanishing_8001):
    for sol in (sol_vanishing_4001, sol_vanishing_8001):
        k = sol.grid.nodes
        h = sol.grid.h
        flip = k[np.argmax(sol.active > 1)]
        assert abs(flip - KD12) <= h, f"flip {flip} vs production crossing {KD12}"


@pytest.mark.xfail(strict=True, reason=PASTE_DEFECT)
def test_vanishing_matches_stay_value_paste(sol_vanishing_4001, bench):
    sol = sol_vanishing_4001
    paste = an.two_regime_solution(bench)
    k = sol.grid.nodes
    h = sol.grid.h
    mask = (k >= 0.1) & (k <= 5.0) & (np.abs(k - 1.0) > h) & (np.abs(k - K12) > h)
    v_paste = np.array([paste.value(kk) for kk in k[mask]])
    assert rel_sup(sol.v[mask], v_paste) <= 1e-3


@pytest.mark.xfail(strict=True, reason=PASTE_DEFECT)
def test_vanishing_flip_at_stay_value_crossing(sol_vanishing_4001):
    sol = sol_vanishing_4001
    k = sol.grid.nodes
    flip = k[np.argmax(sol.active > 1)]
    assert abs(flip - K12) <= sol.grid.h


def test_refinement_order_vs_ode_reference(bench):
    from oracle_ode import pooled_value

    errors = []
    for n in (501, 1001, 2001, 4001):
        sol = sg.solve_vanishing(bench, sg.Grid(0.01, 6.0, n))
        assert sol.converged
        k = sol.grid.nodes
        h = sol.grid.h
        mask = (k >= 0.1) & (k <= 5.0) & (np.abs(k - 1.0) > h) & (np.abs(k - KD12) > h)
        v_ref = pooled_value(bench, k[mask])
        errors.append(rel_sup(sol.v[mask], v_ref))
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    assert all(r >= 1.7 for r in ratios), f"errors {errors}, ratios {ratios}"


def test_vanishing_value_monotone(sol_vanishing_4001):
    dv = np.diff(sol_vanishing_4001.v)
    assert np.all(dv >= -1e-9)


def test_linear_growth_envelope(sol_vanishing_4001):
    # |v| <= C (1 + k) grid-wide; for gamma > 1 the magnitude peaks at the
    # smallest capital, so C is fitted at the two binding (lowest) nodes
    k = sol_vanishing_4001.grid.nodes
    v = np.abs(sol_vanishing_4001.v)
    C = max(v[0] / (1 + k[0]), v[1] / (1 + k[1]))
    assert np.all(v <= C * (1 + k) * (1 + 1e-12))


def test_vanishing_determinism(bench):
    g = sg.Grid(0.01, 6.0, 501)
    a = sg.solve_vanishing(bench, g)
    b = sg.solve_vanishing(bench, g)
    assert np.array_equal(a.v, b.v)
    assert np.array_equal(a.active, b.active)
    assert a.iterations == b.iterations


def test_grid_search_mode_agrees_with_closed_form(bench):
    g = sg.Grid(0.05, 6.0, 301)
    cf = sg.solve_vanishing(bench, g, sg.SolverConfig(tol=1e-8))
    gs = sg.solve_vanishing(bench, g, sg.SolverConfig(
        tol=1e-8, consumption_mode="grid-search", n_c=1201))
    assert gs.converged
    assert rel_sup(gs.v, cf.v) <= 2e-3


# -- costed system -------------------------------------------------------------

@pytest.fixture(scope="module")
def costed_solutions():
    grid = sg.Grid(0.01, 6.0, 2001)
    out = {}
    for eta in (0.1, 0.02, 0.01, 0.001):
        p = benchmark_problem(eta=eta)
        out[eta] = sg.solve_qvi(p, grid)
        assert out[eta].converged
    out["vanishing"] = sg.solve_vanishing(benchmark_problem(), grid)
    return out


def test_qvi_rejects_vanishing(bench):
    with pytest.raises(ValueError, match="solve_vanishing"):
        sg.solve_qvi(bench, sg.Grid(0.01, 6.0, 101))


def test_qvi_rejects_invalid_problem():
    p = benchmark_problem(regimes=((0.3, 0.0), (0.2, 1.0)), eta=0.01)
    with pytest.raises(ValueError, match="invalid problem"):
        sg.solve_qvi(p, sg.Grid(0.01, 6.0, 101))


def test_costed_value_gap_bounded_by_cost(costed_solutions):
    for eta in (0.1, 0.01, 0.001):
        sol = costed_solutions[eta]
        gap = float(np.max(np.abs(sol.v[0] - sol.v[1])))
        assert gap <= eta + 1e-9


def test_vanishing_collapse_is_monotone(costed_solutions):
    gaps = [float(np.max(np.abs(costed_solutions[e].v[0] - costed_solutions[e].v[1])))
            for e in (0.1, 0.01, 0.001)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 5e-3


def test_costed_sandwich_against_vanishing(costed_solutions):
    # both regimes are bounded above by the costless value; the lower bound
    # counts the switches the costed optimum actually needs: one from
    # regime 1 (upgrade only), but up to two from regime 2, which may pay to
    # step down below the production crossing and re-upgrade later
    v_pool = costed_solutions["vanishing"].v
    for eta in (0.1, 0.01, 0.001):
        sol = costed_solutions[eta]
        for i in (0, 1):
            assert np.all(sol.v[i] <= v_pool + 1e-9)
        assert np.all(sol.v[0] >= v_pool - eta - 1e-9)
        assert np.all(sol.v[1] >= v_pool - 2.0 * eta - 1e-9)


@pytest.mark.xfail(strict=True, reason=PASTE_DEFECT)
def test_costed_upper_sandwich_against_paste(costed_solutions, bench):
    paste = an.two_regime_solution(bench)
    sol = costed_solutions[0.01]
    k = sol.grid.nodes
    v_paste = np.array([paste.value(kk) for kk in k])
    assert np.all(sol.v[0] <= v_paste + 1e-9)


def test_cost_monotonicity(costed_solutions):
    lo, hi = costed_solutions[0.01], costed_solutions[0.02]
    for i in (0, 1):
        assert np.all(hi.v[i] <= lo.v[i] + 1e-9)


def test_obstacle_dominance_everywhere(costed_solutions):
    for eta in (0.1, 0.01):
        sol = costed_solutions[eta]
        e = sol.problem.costs.eta
        for i in (0, 1):
            j = 1 - i
            assert np.all(sol.v[i] >= sol.v[j] - e[i, j] - 1e-7)


def test_qvi_residual_converged(costed_solutions):
    for eta in (0.1, 0.01, 0.001):
        sol = costed_solutions[eta]
        rep = sg.qvi_residual(sol, sol.problem)
        assert rep.max_hjb_residual <= 10 * sol.config.tol
        assert rep.max_obstacle_violation <= 10 * sol.config.tol
        assert rep.violations == ()


def test_qvi_residual_flags_perturbation(costed_solutions):
    sol = costed_solutions[0.01]
    m = sol.mesh_v.shape[1] // 2
    v_bad = sol.mesh_v.copy()
    v_bad[0, m] += 1.0
    bad = dataclasses.replace(sol, mesh_v=v_bad)
    rep = sg.qvi_residual(bad, sol.problem)
    assert rep.violations
    flagged_nodes = {node for _, node, _ in rep.violations}
    assert any(abs(node - m) <= 1 for node in flagged_nodes)
    # locality: everything flagged sits in the perturbed node's neighborhood
    assert all(abs(node - m) <= 1 for node in flagged_nodes)


def test_qvi_residual_rejects_constant_vector(costed_solutions):
    sol = costed_solutions[0.01]
    v_const = np.full_like(sol.mesh_v, -50.0)
    bad = dataclasses.replace(sol, mesh_v=v_const,
                              mesh_switch=np.zeros_like(sol.mesh_switch))
    rep = sg.qvi_residual(bad, sol.problem)
    assert rep.max_hjb_residual > 1e-3


def test_costed_values_monotone_in_k(costed_solutions):
    sol = costed_solutions[0.01]
    for i in (0, 1):
        assert np.all(np.diff(sol.v[i]) >= -1e-9)


def test_costed_switch_region_starts_above_production_crossing(costed_solutions):
    # positive costs delay the upgrade relative to the costless optimum
    sol = costed_solutions[0.01]
    regions = sg.extract_regions(sol)
    s1 = regions.switch_pieces(1)
    assert len(s1) == 1 and s1[0].target == 2
    assert s1[0].lo >= KD12 - sol.grid.h


def test_nonconvergence_reported(bench):
    p = benchmark_problem(eta=0.01)
    sol = sg.solve_qvi(p, sg.Grid(0.01, 6.0, 501), sg.SolverConfig(max_iter=1))
    assert not sol.converged
    assert sol.iterations == 1
    assert sol.diagnostics["sup_change_final"] > sol.config.tol


# -- region extraction ---------------------------------------------------------

def test_extract_regions_vanishing_benchmark(sol_vanishing_4001):
    regions = sg.extract_regions(sol_vanishing_4001)
    s1 = regions.switch_pieces(1)
    assert len(s1) == 1 and s1[0].target == 2
    assert abs(s1[0].lo - KD12) <= sol_vanishing_4001.grid.h
    assert math.isinf(s1[0].hi)
    s2 = regions.switch_pieces(2)
    assert len(s2) == 1 and s2[0].target == 1 and s2[0].lo == 0.0


@pytest.mark.xfail(strict=True, reason=PASTE_DEFECT)
def test_extract_regions_starts_at_stay_value_crossing(sol_vanishing_4001):
    regions = sg.extract_regions(sol_vanishing_4001)
    s1 = regions.switch_pieces(1)
    assert abs(s1[0].lo - K12) <= sol_vanishing_4001.grid.h


def test_three_regime_numeric_regions(bench3):
    sol = sg.solve_vanishing(bench3, sg.Grid(0.01, 6.0, 4001))
    assert sol.converged
    regions = sg.extract_regions(sol)
    s1 = regions.switch_pieces(1)
    assert len(s1) == 2
    assert s1[0].target == 2 and s1[1].target == 3
    h = sol.grid.h
    # endpoints sit at the production crossings of the pooled optimum
    assert abs(s1[0].lo - KD12) <= h
    assert abs(s1[0].hi - KD23) <= h
    assert abs(s1[1].lo - KD23) <= h
    assert math.isinf(s1[1].hi)


# -- comparative advantage -----------------------------------------------------

def test_comparative_advantage(costed_solutions):
    from switchgrowth.solver import comparative_advantage

    sol = costed_solutions[0.01]
    assert comparative_advantage(sol, 1, 2, 2, 3.0) == 0.0
    # deep in the upgrade region the obstacle binds, so the cost-adjusted gap
    # sits at its indifference value of exactly zero; elsewhere it is negative
    h_2_over_1 = comparative_advantage(sol, 1, 2, 1, 3.0)
    assert h_2_over_1 == pytest.approx(0.0, abs=1e-9)
    assert comparative_advantage(sol, 1, 2, 1, 0.5) < 0.0
    # antisymmetry in the target pair: H(j, l) = -H(l, j)
    p3 = benchmark_problem(regimes=THREE_REGIMES, eta=0.01)
    sol3 = sg.solve_qvi(p3, sg.Grid(0.01, 6.0, 501))
    a = comparative_advantage(sol3, 1, 2, 3, 3.0)
    b = comparative_advantage(sol3, 1, 3, 2, 3.0)
    assert a == pytest.approx(-b, abs=1e-12)
    with pytest.raises(ValueError, match="differ"):
        comparative_advantage(sol, 1, 1, 2, 3.0)
    with pytest.raises(ValueError, match="out of range"):
        comparative_advantage(sol, 1, 4, 2, 3.0)
