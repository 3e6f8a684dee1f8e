"""Pontryagin machinery: Hamiltonian, costates, switching functions and the
pointwise optimal-control characterizations.

The multiplier of the running cost is fixed to 1.  Costates have zero
terminal data (free final states).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import _check_grid, _model_arrays
from .errors import (
    DegenerateDenominator,
    ExponentNotLinear,
    ExponentNotSuperlinear,
    GridMismatch,
    NonconvexNu,
    NotSIR,
)
from .model import eval_nu, grad_nu, hess_nu_diag

SWITCH_REL_TOL = 1e-6


@dataclass(frozen=True)
class CostateTrajectory:
    grid: np.ndarray
    p_s: np.ndarray
    p_x: np.ndarray
    p_r: np.ndarray
    eta: np.ndarray
    Psi: np.ndarray
    psi_norm: np.ndarray

    @property
    def costates(self):
        """Flat (N + 1, n + 2) array ``[p_s, p_x, p_r]``."""
        return np.column_stack([self.p_s, self.p_x, self.p_r])


def _assemble(grid, P, traj, cost):
    n = P.shape[1] - 2
    p_s, p_x, p_r = P[:, 0], P[:, 1:n + 1], P[:, n + 1]
    eta = p_x[:, 0] - p_s
    Psi = (eta * traj.s)[:, None] * traj.x
    return CostateTrajectory(grid=grid, p_s=p_s, p_x=p_x, p_r=p_r, eta=eta, Psi=Psi,
                             psi_norm=Psi / (cost.q * cost.C))


def integrate_adjoint(scenario, traj, control):
    """Backward RK4 for (p_s, p_x, p_r) along a stored forward trajectory."""
    grid = _check_grid(scenario, control)
    if traj.grid.shape != grid.shape or not np.array_equal(traj.grid, grid):
        raise GridMismatch("trajectory and control live on different grids")
    M, sigma, _, rho, beta = _model_arrays(scenario.model)
    cost = scenario.cost
    P = kernels.rk4_adjoint(traj.states, control.u, grid[1] - grid[0], M, sigma, rho, beta,
                            np.ascontiguousarray(cost.w), np.ascontiguousarray(cost.rexp))
    return _assemble(grid, P, traj, cost)


def _split_state(y, n):
    y = np.asarray(y, dtype=float)
    return y[..., 0], y[..., 1:n + 1], y[..., n + 1]


def hamiltonian(model, cost, u, state, costate):
    """H with unit cost multiplier; arrays broadcast over leading node axes.

    ``state`` rows are ``[s, x_1..x_n, r(, d)]`` and ``costate`` rows are
    ``[p_s, p_x1..p_xn, p_r]``.
    """
    n = model.n
    u = np.asarray(u, dtype=float)
    s, x, r = _split_state(state, n)
    p = np.asarray(costate, dtype=float)
    p_s, p_x, p_r = p[..., 0], p[..., 1:n + 1], p[..., n + 1]
    eta = p_x[..., 0] - p_s
    return (eval_nu(cost, x) + np.sum(cost.C * u ** cost.q, axis=-1)
            + eta * s * np.sum((model.beta_bar - u) * x, axis=-1)
            + model.rho * (p_s - p_r) * r
            + np.sum(p_x * (x @ model.M.T), axis=-1)
            + p_r * (x @ model.sigma))


def hamiltonian_path(scenario, traj, control, costates):
    return hamiltonian(scenario.model, scenario.cost, control.u, traj.states, costates.costates)


def control_superlinear(cost, eta, s, x, u_bar):
    """Pointwise minimizer of H over the box when every q_i > 1."""
    q = cost.q
    if np.any(q <= 1.0):
        raise ExponentNotSuperlinear(f"control exponents must exceed 1, got q = {q.tolist()}")
    eta = np.asarray(eta, dtype=float)
    s = np.asarray(s, dtype=float)
    psi = (eta * s)[..., None] * np.asarray(x, dtype=float) / (q * cost.C)
    return np.minimum(np.maximum(psi, 0.0) ** (1.0 / (q - 1.0)), u_bar)


def control_linear(cost, Psi, u_bar, singular_fill="zero", previous=None):
    """Bang values from the switching function when every q_i = 1.

    Nodes with |Psi_i - C_i| <= 1e-6 C_i are left open by the first-order
    conditions; ``singular_fill`` picks 0, u_bar, or the value at the
    previous node (``hold_previous``; the first node falls back to
    ``previous`` or 0).
    """
    if np.any(cost.q != 1.0):
        raise ExponentNotLinear(f"control exponents must equal 1, got q = {cost.q.tolist()}")
    if singular_fill not in ("zero", "max", "hold_previous"):
        raise ValueError(f"unknown singular_fill {singular_fill!r}")
    Psi = np.asarray(Psi, dtype=float)
    C = cost.C
    u_bar = np.broadcast_to(np.asarray(u_bar, dtype=float), Psi.shape)
    tol = SWITCH_REL_TOL * C
    u = np.where(Psi > C + tol, u_bar, 0.0)
    open_ = np.abs(Psi - C) <= tol
    if singular_fill == "max":
        u = np.where(open_, u_bar, u)
    elif singular_fill == "hold_previous":
        if Psi.ndim == 1:
            start = np.zeros_like(C) if previous is None else np.asarray(previous, dtype=float)
            u = np.where(open_, start, u)
        else:
            carry = np.zeros_like(C) if previous is None else np.asarray(previous, dtype=float)
            for k in range(Psi.shape[0]):
                u[k] = np.where(open_[k], carry, u[k])
                carry = u[k]
    return u


def switching_gradient(cost, costates, control):
    """dH/du along a stored solution: q C u^(q-1) - Psi."""
    u = control.u
    lin = cost.q == 1.0
    safe = np.where(u > 0.0, u, 1.0)
    slope = np.where(lin, cost.C, np.where(u > 0.0, cost.q * cost.C * safe ** (cost.q - 1.0), 0.0))
    return slope - costates.Psi


def _require_sir(model):
    if model.n != 1 or model.rho != 0.0:
        raise NotSIR(f"formula needs n = 1 and rho = 0 (got n = {model.n}, rho = {model.rho:g})")


def feedback_singular_n1(model, cost, s, x, eta):
    """Singular-arc feedback control for SIR with autonomous strictly convex nu.

    Returns ``(u, u_clamped)``; ``u`` is the raw law beta - gamma nu'' /
    (s nu'' + gamma eta), ``u_clamped`` is clipped to [0, u_bar].
    """
    _require_sir(model)
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float).reshape(s.shape)
    eta = np.asarray(eta, dtype=float)
    curv = float(hess_nu_diag(cost, np.zeros(1))[0])
    if curv <= 0.0:
        raise NonconvexNu("feedback law degenerates: nu'' = 0 (linear state cost)")
    gamma = model.gamma
    denom = x * (s * curv + gamma * eta)
    if np.any(np.abs(denom) < 1e-300):
        raise DegenerateDenominator("x (s nu'' + gamma eta) vanishes")
    u = model.beta_bar[0] - gamma * curv * x / denom
    return u, np.clip(u, 0.0, model.u_bar[0])


def hamiltonian_constant_check(scenario, traj, control, costates):
    H = hamiltonian_path(scenario, traj, control, costates)
    k = float(eval_nu(scenario.cost, traj.x[-1]))
    return {"k_expected": k, "max_deviation": float(np.max(np.abs(H - k))), "H": H}


def eta_derivative(model, cost, x, u, eta, x_final):
    """Rate of eta obtained from the constant Hamiltonian (SIR, rho = 0).

    Uses the general control cost sum C u^q, which is C u for linear costs.
    """
    _require_sir(model)
    x = np.asarray(x, dtype=float).reshape(-1, 1) if np.ndim(x) else np.array([[float(x)]])
    u = np.asarray(u, dtype=float).reshape(x.shape)
    eta = np.asarray(eta, dtype=float).reshape(-1)
    nu = eval_nu(cost, x)
    ctrl = np.sum(cost.C * u ** cost.q, axis=-1)
    nu_f = float(eval_nu(cost, np.atleast_1d(x_final)))
    slope = grad_nu(cost, x)[:, 0]
    xs = x[:, 0]
    out = eta * (model.beta_bar[0] - u[:, 0]) * xs + (nu + ctrl - nu_f - slope * xs) / xs
    return out if out.size > 1 else float(out[0])


def switching_rate(model, cost, state, costate, u):
    """d/dt of Psi_i = eta s x_i by the chain rule through the state and
    adjoint equations.  Rows broadcast like :func:`hamiltonian`."""
    n = model.n
    y = np.asarray(state, dtype=float)
    p = np.asarray(costate, dtype=float)
    u = np.asarray(u, dtype=float)
    s, x, r = _split_state(y, n)
    p_s, p_x, p_r = p[..., 0], p[..., 1:n + 1], p[..., n + 1]
    eta = p_x[..., 0] - p_s
    force = np.sum((model.beta_bar - u) * x, axis=-1)
    s_dot = -s * force + model.rho * r
    x_dot = x @ model.M.T
    x_dot[..., 0] += s * force
    ps_dot = -eta * force
    px1_dot = (-grad_nu(cost, x)[..., 0] - eta * s * (model.beta_bar[0] - u[..., 0])
               - p_x @ model.M[:, 0] - p_r * model.sigma[0])
    eta_dot = px1_dot - ps_dot
    return (eta_dot * s)[..., None] * x + (eta * s_dot)[..., None] * x + (eta * s)[..., None] * x_dot


def feedback_residual_u1(model, cost, state, costate, u, i):
    """Residual of the n >= 2 singular feedback law for u_1 obtained from
    dPsi_i/dt = 0 (component ``i`` >= 2, 1-based): (beta_1 - u_1) minus the
    law's right-hand side.  Diagnostic only; it is never used as a controller.
    """
    n = model.n
    if n < 2 or not 2 <= i <= n:
        raise ValueError("law needs n >= 2 and a component index 2..n")
    y = np.asarray(state, dtype=float)
    p = np.asarray(costate, dtype=float)
    u = np.asarray(u, dtype=float)
    s, x, r = _split_state(y, n)
    p_s, p_x, p_r = p[..., 0], p[..., 1:n + 1], p[..., n + 1]
    eta = p_x[..., 0] - p_s
    xi = x[..., i - 1]
    bracket = grad_nu(cost, x)[..., 0] + p_x @ model.M[:, 0] + p_r * model.sigma[0]
    rhs = (-bracket * s * xi + eta * model.rho * r * xi + eta * s * (x @ model.M[i - 1])) / (eta * s ** 2 * xi)
    return (model.beta_bar[0] - u[..., 0]) - rhs
