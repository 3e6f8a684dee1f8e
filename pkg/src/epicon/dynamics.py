"""Forward simulation of the controlled compartment system on a uniform grid."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import GridMismatch, NonFiniteState

UNDERSHOOT_TOL = 1e-9


@dataclass(frozen=True)
class ControlTrajectory:
    """Node values of the control, shape (N + 1, n), linear between nodes."""

    grid: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        if u.shape[0] != self.grid.shape[0]:
            raise GridMismatch(f"control has {u.shape[0]} nodes, grid has {self.grid.shape[0]}")

    @classmethod
    def constant(cls, scenario, value):
        grid = scenario.grid()
        u = np.broadcast_to(np.asarray(value, dtype=float), (grid.size, scenario.n))
        return cls(grid, np.array(u))

    @classmethod
    def zeros(cls, scenario):
        return cls.constant(scenario, 0.0)

    @classmethod
    def upper(cls, scenario):
        return cls.constant(scenario, scenario.model.u_bar)

    def admissible(self, u_bar, atol=0.0):
        return bool(np.all(self.u >= -atol) and np.all(self.u <= np.asarray(u_bar) + atol))

    def at(self, t):
        """Linear interpolation of every component at times ``t``."""
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.grid, self.u[:, i]) for i in range(self.u.shape[1])], axis=-1)


@dataclass(frozen=True)
class Trajectory:
    grid: np.ndarray
    s: np.ndarray
    x: np.ndarray
    r: np.ndarray
    d: np.ndarray

    @classmethod
    def from_states(cls, grid, Y):
        n = Y.shape[1] - 3
        return cls(grid=grid, s=Y[:, 0], x=Y[:, 1:n + 1], r=Y[:, n + 1], d=Y[:, n + 2])

    @property
    def n(self):
        return self.x.shape[1]

    @property
    def states(self):
        """Flat (N + 1, n + 3) array ``[s, x, r, d]`` as used by the kernels."""
        return np.ascontiguousarray(np.column_stack([self.s, self.x, self.r, self.d]))

    @property
    def total(self):
        return self.s + self.x.sum(axis=1) + self.r + self.d

    def every(self, stride):
        """Restriction to every ``stride``-th node (coarse nodes of a refined run)."""
        sl = slice(None, None, stride)
        return Trajectory(self.grid[sl], self.s[sl], self.x[sl], self.r[sl], self.d[sl])


def _check_grid(scenario, control):
    grid = scenario.grid()
    if control.grid.shape != grid.shape or not np.allclose(control.grid, grid, rtol=0, atol=1e-9 * scenario.t_f):
        raise GridMismatch(
            f"control grid ({control.grid.size} nodes on [0, {control.grid[-1]:g}]) does not match "
            f"scenario grid ({grid.size} nodes on [0, {scenario.t_f:g}])")
    if control.u.shape[1] != scenario.n:
        raise GridMismatch(f"control has {control.u.shape[1]} components, model has n = {scenario.n}")
    return grid


def _model_arrays(model):
    return (np.ascontiguousarray(model.M), np.ascontiguousarray(model.sigma),
            np.ascontiguousarray(model.mu), model.rho, np.ascontiguousarray(model.beta_bar))


def _integrate(scenario, grid, u):
    M, sigma, mu, rho, beta = _model_arrays(scenario.model)
    h = grid[1] - grid[0]
    Y = kernels.rk4_forward(scenario.init.as_state(), u, h, M, sigma, mu, rho, beta)
    if not np.all(np.isfinite(Y)):
        k = int(np.argmax(~np.all(np.isfinite(Y), axis=1)))
        raise NonFiniteState(f"state became non-finite at t = {grid[k]:g}")
    low = Y.min()
    if low < -UNDERSHOOT_TOL:
        k, j = np.unravel_index(np.argmin(Y), Y.shape)
        raise NonFiniteState(f"state component {j} undershoots to {low:.3e} at t = {grid[k]:g}")
    return Trajectory.from_states(grid, Y)


def simulate_forward(scenario, control):
    """Classical RK4 on the scenario grid; control halves are node means."""
    grid = _check_grid(scenario, control)
    return _integrate(scenario, grid, control.u)


def simulate_dense(scenario, control, refine):
    """Same as :func:`simulate_forward` on a grid refined ``refine`` times."""
    refine = int(refine)
    if refine < 1:
        raise ValueError("refine must be >= 1")
    _check_grid(scenario, control)
    if refine == 1:
        return simulate_forward(scenario, control)
    fine = np.linspace(0.0, scenario.t_f, scenario.grid_points * refine + 1)
    return _integrate(scenario, fine, np.ascontiguousarray(control.at(fine)))


def epidemic_metrics(traj):
    infected = traj.x.sum(axis=1)
    k = int(np.argmax(infected))  # first maximum wins ties
    return {
        "peak_infected": float(infected[k]),
        "peak_time": float(traj.grid[k]),
        "final_susceptible": float(traj.s[-1]),
        "total_deceased": float(traj.d[-1] - traj.d[0]),
    }
