import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epicon import (
    PRESET_NAMES,
    CostSpec,
    EpidemicModel,
    InitialState,
    eval_nu,
    grad_nu,
    hess_nu_diag,
    preset,
    validate_cost,
    validate_init,
    validate_model,
    validate_scenario,
)
from epicon.errors import UnknownPreset

SIR = EpidemicModel(M=[[-0.06]], sigma=[0.06], mu=[0.0], rho=0.0, beta_bar=[0.16], u_bar=[0.08])


def test_sir_model_is_valid():
    assert validate_model(SIR).ok


def test_closed_population_residual_is_named():
    bad = EpidemicModel(M=[[-0.06]], sigma=[0.05], mu=[0.0], rho=0.0, beta_bar=[0.16], u_bar=[0.08])
    rep = validate_model(bad)
    assert not rep.ok
    assert any("closed-population residual -0.01 in column 1" in v for v in rep.violations)


def test_seir_shape_is_valid():
    a, g = 0.2, 0.06
    m = EpidemicModel(M=[[-a, 0], [a, -g]], sigma=[0, g], mu=[0, 0], rho=0.0,
                      beta_bar=[0.01, 0.16], u_bar=[0.005, 0.08])
    assert validate_model(m).ok


@pytest.mark.parametrize("M, fragment", [
    ([[-0.2, 0.1], [0.2, -0.16]], "lower triangular"),
    ([[-0.1, 0.0], [-0.05, -0.06]], "Metzler"),
])
def test_structural_violations(M, fragment):
    M = np.array(M)
    sigma = -M.sum(axis=0)
    m = EpidemicModel(M=M, sigma=sigma, mu=[0, 0], rho=0.0, beta_bar=[0.1, 0.1], u_bar=[0.05, 0.05])
    assert any(fragment in v for v in validate_model(m).violations)


def test_control_bound_must_not_exceed_transmission():
    m = EpidemicModel(M=[[-0.06]], sigma=[0.06], mu=[0.0], rho=0.0, beta_bar=[0.16], u_bar=[0.2])
    assert not validate_model(m).ok


def test_init_examples():
    assert validate_init(InitialState(0.999, [0.001], 0.0), 1).ok
    rep = validate_init(InitialState(0.999, [0.0], 0.0), 1)
    assert "x0[1] must be strictly positive" in rep.violations
    rep = validate_init(InitialState(0.6, [0.3, 0.3], 0.0), 2)
    assert any("total exceeds 1" in v for v in rep.violations)


def test_cost_exponent_range():
    rep = validate_cost(CostSpec(w=[1], rexp=[2], C=[1], q=[3]), 1)
    assert any("q out of [1,2]" in v for v in rep.violations)
    assert not validate_cost(CostSpec(w=[1], rexp=[3], C=[1], q=[2]), 1).ok
    assert not validate_cost(CostSpec(w=[1], rexp=[2], C=[0], q=[2]), 1).ok


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_every_preset_validates(name):
    sc = preset(name)
    assert validate_scenario(sc).ok
    m = sc.model
    np.testing.assert_allclose(m.M.sum(axis=0), -(m.sigma + m.mu), atol=1e-12, rtol=0)
    assert sc.t_f == 360.0 and sc.grid_points == 3600


def test_paper_preset_values():
    ll = preset("sir_paper_ll_01")
    assert ll.cost.w.tolist() == [2.0] and ll.cost.rexp.tolist() == [1.0] and ll.cost.q.tolist() == [1.0]
    assert ll.model.u_bar.tolist() == [0.1]
    assert preset("sir_paper_qq_008").model.u_bar.tolist() == [0.08]
    for name in ("sir_paper_qq_008", "sir_paper_qq_004", "sir_paper_ql_01", "sir_paper_ql_008", "sir_paper_ll_01"):
        sc = preset(name)
        assert sc.model.beta_bar.tolist() == [0.16] and sc.model.gamma == 0.06
        assert sc.init.s0 == 0.999 and sc.init.x0.tolist() == [0.001] and sc.init.r0 == 0.0
    ql = preset("sir_paper_ql_01").cost
    assert (ql.w.tolist(), ql.rexp.tolist(), ql.C.tolist(), ql.q.tolist()) == ([30.0], [2.0], [1.0], [1.0])


def test_unknown_preset():
    with pytest.raises(UnknownPreset):
        preset("no_such_scenario")


def test_records_are_immutable():
    with pytest.raises(ValueError):
        SIR.M[0, 0] = 1.0
    with pytest.raises(AttributeError):
        SIR.rho = 0.5


def test_scenario_equality_ignores_name():
    a = preset("seir")
    assert a.replace(name="other") == a
    assert a.replace(grid_points=100) != a


def test_nu_examples():
    c = CostSpec(w=[30], rexp=[2], C=[1], q=[1])
    assert eval_nu(c, np.array([0.1])) == pytest.approx(0.3)
    np.testing.assert_allclose(grad_nu(c, np.array([0.1])), [6.0])
    np.testing.assert_allclose(hess_nu_diag(c, np.array([0.1])), [60.0])
    c = CostSpec(w=[2], rexp=[1], C=[1], q=[1])
    assert eval_nu(c, np.array([0.5])) == pytest.approx(1.0)
    np.testing.assert_allclose(grad_nu(c, np.array([0.5])), [2.0])
    np.testing.assert_allclose(hess_nu_diag(c, np.array([0.5])), [0.0])
    c = CostSpec(w=[7], rexp=[2], C=[1], q=[2])
    assert eval_nu(c, np.zeros(1)) == 0.0 and grad_nu(c, np.zeros(1)).tolist() == [0.0]


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**31 - 1))
def test_grad_nu_matches_central_differences(n, seed):
    rng = np.random.default_rng(seed)
    c = CostSpec(w=rng.uniform(0, 5, n), rexp=rng.choice([1.0, 2.0], n), C=np.ones(n), q=np.full(n, 2.0))
    for x in rng.uniform(0.01, 0.99, (4, n)):
        g = grad_nu(c, x)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1e-6
            fd = (eval_nu(c, x + e) - eval_nu(c, x - e)) / 2e-6
            assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-9)
