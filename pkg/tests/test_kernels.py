"""Both kernel backends must agree; the compiled one is checked against the
vectorized numpy one, which is importable in any configuration."""

import os
import subprocess
import sys

import numpy as np
import pytest

from epicon import CostSpec, _loops, _vector, kernels, preset
from epicon.solver import _Problem


def _args(name, N=240, seed=0):
    sc = preset(name).replace(grid_points=N)
    p = _Problem(sc)
    rng = np.random.default_rng(seed)
    u = rng.uniform(0, 1, (N + 1, sc.n)) * p.u_bar
    return p, u


@pytest.mark.parametrize("name", ["sir_paper_qq_008", "sirs", "seirs", "covid_n3", "influenza_n3"])
def test_forward_adjoint_gradient_agree(name):
    p, u = _args(name)
    Ya = _loops.rk4_forward(p.y0, u, p.h, p.M, p.sigma, p.mu, p.rho, p.beta)
    Yb = _vector.rk4_forward(p.y0, u, p.h, p.M, p.sigma, p.mu, p.rho, p.beta)
    np.testing.assert_allclose(Ya, Yb, rtol=0, atol=1e-14)
    Pa = _loops.rk4_adjoint(Ya, u, p.h, p.M, p.sigma, p.rho, p.beta, p.w, p.rexp)
    Pb = _vector.rk4_adjoint(Ya, u, p.h, p.M, p.sigma, p.rho, p.beta, p.w, p.rexp)
    np.testing.assert_allclose(Pa, Pb, rtol=1e-12, atol=1e-13)
    Ga = _loops.discrete_cost_gradient(Ya, u, p.h, p.M, p.sigma, p.mu, p.rho, p.beta, p.w, p.rexp, p.C, p.q)
    Gb = _vector.discrete_cost_gradient(Ya, u, p.h, p.M, p.sigma, p.mu, p.rho, p.beta, p.w, p.rexp, p.C, p.q)
    np.testing.assert_allclose(Ga, Gb, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("name, pieces, levels", [
    ("sir_paper_ql_01", 3, 4), ("sir_paper_qq_004", 2, 5), ("seir", 2, 3)])
def test_exhaustive_search_agrees(name, pieces, levels):
    p, _ = _args(name, N=120)
    N = 120
    bounds = np.array([round(k * N / pieces) for k in range(pieces)], dtype=np.int64)
    vals = np.ascontiguousarray([np.linspace(0, ub, levels) for ub in p.u_bar])
    a = _loops.exhaustive_piecewise(p.y0, p.h, N, bounds, vals, p.M, p.sigma, p.mu, p.rho, p.beta,
                                    p.w, p.rexp, p.C, p.q)
    b = _vector.exhaustive_piecewise(p.y0, p.h, N, bounds, vals, p.M, p.sigma, p.mu, p.rho, p.beta,
                                     p.w, p.rexp, p.C, p.q)
    assert list(a[0]) == list(b[0])
    assert a[1] == pytest.approx(b[1], rel=1e-13)


def test_discrete_gradient_matches_finite_differences():
    mixed = CostSpec(w=[1.0, 0.0, 3.0], rexp=[2.0, 1.0, 1.0], C=[1.0, 2.0, 0.5], q=[2.0, 1.0, 1.5])
    sc = preset("covid_n3").replace(grid_points=150, cost=mixed)
    p = _Problem(sc)
    rng = np.random.default_rng(3)
    u = rng.uniform(0.1, 0.9, (151, 3)) * p.u_bar
    G = kernels.discrete_cost_gradient(p.forward(u), u, p.h, p.M, p.sigma, p.mu, p.rho, p.beta,
                                       p.w, p.rexp, p.C, p.q)

    def J(v):
        return p.objective(p.forward(v), v)

    for k, i in [(0, 0), (40, 1), (75, 2), (150, 0), (149, 2)]:
        e = np.zeros_like(u)
        e[k, i] = 1e-5
        fd = (J(u + e) - J(u - e)) / 2e-5
        assert fd == pytest.approx(G[k, i], rel=1e-6, abs=1e-9)


def test_backend_flag_selects_numpy():
    env = dict(os.environ, EPICON_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", "from epicon import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_backend_flag_rejects_unknown_value():
    env = dict(os.environ, EPICON_BACKEND="fortran")
    out = subprocess.run([sys.executable, "-c", "import epicon"], env=env, capture_output=True, text=True)
    assert out.returncode != 0 and "EPICON_BACKEND" in out.stderr
