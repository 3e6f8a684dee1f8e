import warnings

import numpy as np
import pytest

from epicon import ControlTrajectory, CostSpec, preset, simulate_dense, simulate_forward
from epicon.errors import GridMismatch, LinearCostUnsupported, MaxItersExceeded, SearchSpaceTooLarge
from epicon.solver import (
    SolverConfig,
    brute_force_oracle,
    cost_evaluate,
    gradient,
    solve_fbsm,
    solve_projected_gradient,
    uniqueness_probe,
)

from conftest import solved

SIR = preset("sir_paper_qq_008")
NO_STATE_COST = CostSpec(w=[0.0], rexp=[2.0], C=[1.0], q=[2.0])


def test_cost_of_free_uncontrolled_run_is_zero():
    sc = SIR.replace(cost=NO_STATE_COST)
    u = ControlTrajectory.zeros(sc)
    assert cost_evaluate(sc, simulate_forward(sc, u), u) == 0.0


def test_trapezoid_exact_on_constant_integrand():
    sc = SIR.replace(cost=CostSpec(w=[0.0], rexp=[1.0], C=[2.0], q=[1.0]))
    u = ControlTrajectory.constant(sc, 0.05)
    assert cost_evaluate(sc, simulate_forward(sc, u), u) == pytest.approx(0.1 * 360.0, rel=1e-13)


def test_linear_cost_against_dense_quadrature():
    sc = preset("sir_paper_ll_01")
    u = ControlTrajectory.zeros(sc)
    coarse = cost_evaluate(sc, simulate_forward(sc, u), u)
    fine = simulate_dense(sc, u, 8)
    tw = np.full(fine.grid.size, fine.grid[1])
    tw[0] = tw[-1] = 0.5 * fine.grid[1]
    dense = float(tw @ (2.0 * fine.x[:, 0]))
    assert coarse == pytest.approx(dense, rel=1e-6)


def test_cost_grid_mismatch():
    u = ControlTrajectory.zeros(SIR)
    with pytest.raises(GridMismatch):
        cost_evaluate(SIR, simulate_forward(SIR, u).every(2), u)


def test_gradient_special_forms():
    # same state cost, u = 0: q = 2 gives -Psi_h and q = 1 gives C - Psi_h
    quad = SIR.replace(grid_points=200, cost=CostSpec(w=[30.0], rexp=[2.0], C=[1.0], q=[2.0]))
    lin = quad.replace(cost=CostSpec(w=[30.0], rexp=[2.0], C=[1.0], q=[1.0]))
    u = ControlTrajectory.zeros(quad)
    tr = simulate_forward(quad, u)
    g_q = gradient(quad, tr, u)
    g_l = gradient(lin, tr, u)
    assert np.all(g_q <= 0.0)
    np.testing.assert_allclose(g_l - g_q, 1.0, rtol=0, atol=1e-12)


def test_gradient_directional_derivatives():
    sc = SIR.replace(grid_points=200)
    rng = np.random.default_rng(0)
    u = ControlTrajectory(sc.grid(), rng.uniform(0.01, 0.07, (201, 1)))
    g = gradient(sc, simulate_forward(sc, u), u)
    tw = np.full(201, sc.step)
    tw[0] = tw[-1] = 0.5 * sc.step

    def J(v):
        c = ControlTrajectory(sc.grid(), v)
        return cost_evaluate(sc, simulate_forward(sc, c), c)

    for _ in range(10):
        d = rng.normal(size=(201, 1))
        h = 1e-6
        fd = (J(u.u + h * d) - J(u.u - h * d)) / (2 * h)
        assert fd == pytest.approx(float(tw @ (g * d)[:, 0]), rel=1e-4)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(smoothing_eps_schedule=(1e-2, 1e-3))
    with pytest.raises(ValueError):
        SolverConfig(smoothing_eps_schedule=(1e-3, 1e-2, 0.0))
    with pytest.raises(ValueError):
        SolverConfig(omega=0.0)
    with pytest.raises(ValueError):
        SolverConfig(method="newton")
    assert SolverConfig(method="pg").method == "projected_gradient"


def test_sweep_without_state_cost_stops_at_zero():
    sc = SIR.replace(cost=NO_STATE_COST)
    rep = solve_fbsm(sc)
    assert rep.converged and rep.iterations <= 2
    assert np.all(rep.u_opt.u == 0.0)


def test_sweep_rejects_linear_costs():
    with pytest.raises(LinearCostUnsupported):
        solve_fbsm(preset("sir_paper_ll_01"))


def test_sweep_saturates_with_small_bound():
    rep = solved("sir_paper_qq_004")
    assert rep.converged
    u = rep.u_opt.u[:, 0]
    at_bound = u == 0.04
    assert at_bound.sum() * preset("sir_paper_qq_004").step >= 10.0


def test_sweep_larger_bound():
    rep = solved("sir_paper_qq_008")
    assert rep.converged and rep.u_opt.u[-1, 0] == 0.0
    zero = ControlTrajectory.zeros(SIR)
    assert rep.cost_value < cost_evaluate(SIR, simulate_forward(SIR, zero), zero)
    assert rep.cost_value == cost_evaluate(SIR, rep.traj, rep.u_opt)
    assert rep.residual_history[-1] <= 1e-6


def test_sweep_reports_non_convergence():
    with pytest.warns(MaxItersExceeded):
        rep = solve_fbsm(SIR.replace(grid_points=200), SolverConfig(max_iters=3))
    assert not rep.converged and rep.iterations == 3


def test_superlinear_control_is_lipschitz_under_refinement():
    slopes = []
    for N in (900, 1800, 3600):
        sc = SIR.replace(grid_points=N)
        rep = solve_fbsm(sc)
        assert rep.u_opt.u[-1, 0] == 0.0
        slopes.append(np.max(np.abs(np.diff(rep.u_opt.u[:, 0]))) / sc.step)
    assert max(slopes) <= 1.5 * min(slopes)


def test_projected_gradient_without_state_cost():
    sc = SIR.replace(cost=NO_STATE_COST, grid_points=200)
    rep = solve_projected_gradient(sc)
    assert rep.converged and np.all(rep.u_opt.u == 0.0)


def test_projected_gradient_agrees_with_sweep():
    a = solved("sir_paper_qq_008")
    b = solved("sir_paper_qq_008", "projected_gradient")
    assert np.max(np.abs(a.u_opt.u - b.u_opt.u)) <= 1e-3


def test_armijo_keeps_cost_monotone_per_stage():
    rep = solved("sir_paper_ql_008")
    hist = rep.cost_history
    assert hist
    for (e0, j0), (e1, j1) in zip(hist, hist[1:]):
        if e0 == e1:
            assert j1 <= j0


def test_box_is_exact():
    for name in ("sir_paper_ql_01", "sir_paper_qq_004", "covid_n5"):
        rep = solved(name)
        ub = preset(name).model.u_bar
        assert np.all(rep.u_opt.u >= 0.0) and np.all(rep.u_opt.u <= ub)


def test_bang_bang_problem_leaves_the_zero_control():
    # u = 0 is a stationary point of this problem; the window start finds the
    # cheaper single intervention
    rep = solved("sir_paper_ll_01")
    zero = ControlTrajectory.zeros(preset("sir_paper_ll_01"))
    sc = preset("sir_paper_ll_01")
    assert rep.cost_value < cost_evaluate(sc, simulate_forward(sc, zero), zero) - 1e-3
    assert rep.structure.sequence_string == "bang(0)-bang(max)-bang(0)"


def test_oracle_trivial_case():
    sc = SIR.replace(cost=NO_STATE_COST, grid_points=60)
    res = brute_force_oracle(sc, 1, 2)
    assert np.all(res["best_u"].u == 0.0) and res["best_cost"] == 0.0


def test_oracle_cost_is_consistent():
    sc = preset("seir").replace(grid_points=300)
    res = brute_force_oracle(sc, 3, 3)
    u = res["best_u"]
    assert res["best_cost"] == pytest.approx(cost_evaluate(sc, simulate_forward(sc, u), u), rel=1e-12)
    vals = np.unique(u.u[:, 1])
    assert set(vals) <= {0.0, 0.04, 0.08}


def test_oracle_dominated_by_solver_over_constants():
    sc = SIR
    res = brute_force_oracle(sc, 1, 5)
    assert solved("sir_paper_qq_008").cost_value <= res["best_cost"]


def test_oracle_guard():
    with pytest.raises(SearchSpaceTooLarge):
        brute_force_oracle(preset("covid_n5"), 3, 5)


def test_uniqueness_single_start():
    assert uniqueness_probe(SIR, 1, 20.0)["max_pairwise_u_gap"] == 0.0


def test_uniqueness_full_horizon_is_reported():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxItersExceeded)
        res = uniqueness_probe(SIR, 3, 360.0)
    assert np.isfinite(res["max_pairwise_u_gap"])
