"""Optimal-control solvers: forward-backward sweep, projected gradient with
epsilon-continuation, and an exhaustive piecewise-constant oracle."""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels, pmp
from .analysis import classify_structure
from .dynamics import ControlTrajectory, Trajectory, _check_grid, _model_arrays, simulate_forward
from .errors import GridMismatch, LinearCostUnsupported, MaxItersExceeded, SearchSpaceTooLarge
from .model import eval_nu

ORACLE_LIMIT = 10_000_000
_L1_FLOOR = 1e-12
TIE_REL = 1e-8

METHODS = ("fbsm", "projected_gradient")


@dataclass(frozen=True)
class SolverConfig:
    method: str = "fbsm"
    max_iters: int = 5000
    tol_rel: float = 1e-6
    omega: float = 0.5
    step0: float = 1.0
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    smoothing_eps_schedule: tuple = (1e-2, 1e-3, 1e-4, 0.0)
    max_halvings: int = 10
    max_backtracks: int = 60
    # Linear-cost problems get a second start: the best single bang window
    # u = u_bar on [a, b] over a grid of this many cells (0 disables).
    window_cells: int = 90

    def __post_init__(self):
        method = {"pg": "projected_gradient"}.get(self.method, self.method)
        object.__setattr__(self, "method", method)
        object.__setattr__(self, "smoothing_eps_schedule", tuple(float(e) for e in self.smoothing_eps_schedule))
        if method not in METHODS:
            raise ValueError(f"method must be one of {METHODS + ('pg',)}, got {self.method!r}")
        if self.max_iters < 1 or self.tol_rel <= 0 or self.step0 <= 0:
            raise ValueError("max_iters, tol_rel and step0 must be positive")
        if not 0 < self.omega <= 1:
            raise ValueError("omega must lie in (0, 1]")
        if not 0 < self.armijo_c < 1 or not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_c and armijo_shrink must lie in (0, 1)")
        eps = self.smoothing_eps_schedule
        if not eps or eps[-1] != 0.0 or any(a <= b for a, b in zip(eps, eps[1:])) or min(eps) < 0:
            raise ValueError("smoothing_eps_schedule must be strictly decreasing and end at 0")
        if self.window_cells < 0:
            raise ValueError("window_cells must be >= 0")


@dataclass
class SolveReport:
    u_opt: ControlTrajectory
    traj: Trajectory
    costates: pmp.CostateTrajectory
    cost_value: float
    iterations: int
    converged: bool
    residual_history: list
    hamiltonian_deviation: float
    structure: object
    method: str = ""
    runtime_s: float = 0.0
    starts: list = field(default_factory=list)
    cost_history: list = field(default_factory=list)  # (eps, cost) per accepted step


def _trapezoid_weights(grid):
    h = grid[1] - grid[0]
    tw = np.full(grid.size, h)
    tw[0] = tw[-1] = 0.5 * h
    return tw


def _same_grid(a, b):
    if a.shape != b.shape or not np.array_equal(a, b):
        raise GridMismatch("trajectory and control live on different grids")


def cost_evaluate(scenario, traj, control):
    """Trapezoid quadrature of nu(x) + sum C u^q over the node values."""
    _same_grid(traj.grid, control.grid)
    c = scenario.cost
    f = eval_nu(c, traj.x) + np.sum(c.C * control.u ** c.q, axis=1)
    return float(_trapezoid_weights(traj.grid) @ f)


def gradient(scenario, traj, control):
    """Gradient of the discretized cost in the trapezoid inner product.

    Exact derivative of (RK4 + trapezoid) with respect to the node values,
    divided by the quadrature weights; it has the form q C u^(q-1) - Psi_h
    with Psi_h the switching values of the discrete adjoint.
    """
    _same_grid(traj.grid, control.grid)
    return _Problem(scenario).gradient(traj.states, control.u)


class _Problem:
    """Kernel arguments of one scenario, bundled for the iterative solvers."""

    def __init__(self, scenario):
        self.scenario = scenario
        self.grid = scenario.grid()
        self.h = float(self.grid[1] - self.grid[0])
        self.tw = _trapezoid_weights(self.grid)
        self.M, self.sigma, self.mu, self.rho, self.beta = _model_arrays(scenario.model)
        c = scenario.cost
        self.cost = c
        self.w, self.rexp = np.ascontiguousarray(c.w), np.ascontiguousarray(c.rexp)
        self.C, self.q = np.ascontiguousarray(c.C), np.ascontiguousarray(c.q)
        self.u_bar = np.asarray(scenario.model.u_bar, dtype=float)
        self.y0 = scenario.init.as_state()

    def forward(self, u):
        return kernels.rk4_forward(self.y0, u, self.h, self.M, self.sigma, self.mu, self.rho, self.beta)

    def objective(self, Y, u, eps=0.0):
        f = eval_nu(self.cost, Y[:, 1:1 + u.shape[1]]) + np.sum(self.C * u ** self.q, axis=1)
        if eps:
            f = f + eps * np.sum(u * u, axis=1)
        return float(self.tw @ f)

    def gradient(self, Y, u, eps=0.0):
        G = kernels.discrete_cost_gradient(Y, u, self.h, self.M, self.sigma, self.mu, self.rho, self.beta,
                                           self.w, self.rexp, self.C, self.q)
        G /= self.tw[:, None]
        if eps:
            G += 2.0 * eps * u
        return G

    def inner(self, a, b):
        return float(self.tw @ np.sum(a * b, axis=1))

    def project(self, u):
        return np.clip(u, 0.0, self.u_bar)


def _rel_l1(diff, ref):
    return float(np.abs(diff).sum() / max(np.abs(ref).sum(), _L1_FLOOR))


def _initial(problem, u0):
    if u0 is None:
        return np.zeros((problem.grid.size, problem.scenario.n))
    u = u0.u if isinstance(u0, ControlTrajectory) else np.asarray(u0, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape != (problem.grid.size, problem.scenario.n):
        raise GridMismatch(f"initial control has shape {u.shape}")
    return problem.project(np.array(u, dtype=float))


def _finish(scenario, u, iterations, converged, history, method, t0, starts=(), costs=()):
    grid = scenario.grid()
    control = ControlTrajectory(grid, u)
    traj = simulate_forward(scenario, control)
    costates = pmp.integrate_adjoint(scenario, traj, control)
    check = pmp.hamiltonian_constant_check(scenario, traj, control, costates)
    structure = classify_structure(control, scenario.model.u_bar, costates, scenario.cost)
    return SolveReport(u_opt=control, traj=traj, costates=costates,
                       cost_value=cost_evaluate(scenario, traj, control), iterations=iterations,
                       converged=converged, residual_history=list(history),
                       hamiltonian_deviation=check["max_deviation"], structure=structure,
                       method=method, runtime_s=time.perf_counter() - t0, starts=list(starts),
                       cost_history=list(costs))


COST_NOISE_REL = 1e-13


def solve_fbsm(scenario, config=None, u0=None):
    """Relaxed forward-backward sweep for superlinear control costs.

    The stopping test is the fixed-point residual |u* - u|_1 / |u|_1 where u*
    is the pointwise minimizer of H along the current iterate; the relaxed
    step is halved (at most ``max_halvings`` times) whenever it raises the
    cost.
    """
    config = config or SolverConfig()
    cost = scenario.cost
    if np.any(cost.q == 1.0):
        raise LinearCostUnsupported("sweep needs q_i > 1 everywhere; use method='projected_gradient'")
    t0 = time.perf_counter()
    prob = _Problem(scenario)
    u = _initial(prob, u0)
    Y = prob.forward(u)
    J = prob.objective(Y, u)
    n = scenario.n
    history = []
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        P = kernels.rk4_adjoint(Y, u, prob.h, prob.M, prob.sigma, prob.rho, prob.beta, prob.w, prob.rexp)
        eta = P[:, 1] - P[:, 0]
        u_star = pmp.control_superlinear(cost, eta, Y[:, 0], Y[:, 1:n + 1], prob.u_bar)
        res = _rel_l1(u_star - u, u)
        history.append(res)
        if res <= config.tol_rel:
            converged = True
            u = u_star
            break
        omega = config.omega
        for _ in range(config.max_halvings + 1):
            u_new = omega * u_star + (1.0 - omega) * u
            Y_new = prob.forward(u_new)
            J_new = prob.objective(Y_new, u_new)
            # cost changes below rounding are noise, not an increase
            if J_new <= J + COST_NOISE_REL * (1.0 + abs(J)):
                break
            omega *= 0.5
        u, Y, J = u_new, Y_new, J_new
    if not converged:
        warnings.warn(f"sweep stopped at max_iters={config.max_iters} (residual {history[-1]:.3e})",
                      MaxItersExceeded, stacklevel=2)
    return _finish(scenario, u, it, converged, history, "fbsm", t0)


def _pg_stage(prob, u, eps, config, history, costs):
    """Projected gradient with Barzilai-Borwein trial steps and Armijo
    backtracking on the eps-regularized cost.  Returns (u, iters, converged)."""
    Y = prob.forward(u)
    J = prob.objective(Y, u, eps)
    g = prob.gradient(Y, u, eps)
    costs.append((eps, J))
    alpha = config.step0
    for it in range(1, config.max_iters + 1):
        res = _rel_l1(prob.project(u - config.step0 * g) - u, u)
        history.append(res)
        if res <= config.tol_rel:
            return u, it - 1, True
        a = alpha
        for _ in range(config.max_backtracks):
            u_new = prob.project(u - a * g)
            Y_new = prob.forward(u_new)
            J_new = prob.objective(Y_new, u_new, eps)
            if J_new <= J + config.armijo_c * prob.inner(g, u_new - u):
                break
            a *= config.armijo_shrink
        else:
            # no decrease representable in floating point: stationary to
            # working precision
            return u, it, False
        g_new = prob.gradient(Y_new, u_new, eps)
        s = u_new - u
        sy = prob.inner(s, g_new - g)
        alpha = prob.inner(s, s) / sy if sy > 0 else config.step0
        alpha = min(max(alpha, 1e-10), 1e10)
        u, J, g = u_new, J_new, g_new
        costs.append((eps, J))
    return u, config.max_iters, False


def _continuation(prob, u, config, schedule):
    history = []
    costs = []
    iters = 0
    converged = False
    for eps in schedule:
        u, k, converged = _pg_stage(prob, u, eps, config, history, costs)
        iters += k
    return u, iters, converged, history, costs


def _window_cost(prob, lin, a, b):
    u = np.zeros((prob.grid.size, prob.scenario.n))
    u[a:b + 1, lin] = prob.u_bar[lin]
    return prob.objective(prob.forward(u), u), u


def _window_seed(prob, config):
    """Best control of the form u_i = u_bar_i on one node window [a, b] (all
    linear components together, others zero): a coarse scan over
    ``window_cells`` cells, then a node-level scan around the coarse winner."""
    lin = np.flatnonzero(prob.cost.q == 1.0)
    cells = min(config.window_cells, prob.grid.size - 1)
    if lin.size == 0 or cells < 2:
        return None
    N = prob.grid.size - 1
    marks = np.unique(np.round(np.linspace(0, N, cells + 1)).astype(int))
    best = (np.inf, None, 0, 0)
    for ia, a in enumerate(marks):
        for b in marks[ia + 1:]:
            J, u = _window_cost(prob, lin, a, b)
            if J < best[0]:
                best = (J, u, a, b)
    if best[1] is None:
        return None
    step = int(np.max(np.diff(marks)))
    _, _, a0, b0 = best
    for a in range(max(0, a0 - step), min(N, a0 + step) + 1):
        for b in range(max(a + 1, b0 - step), min(N, b0 + step) + 1, max(1, step // 10)):
            J, u = _window_cost(prob, lin, a, b)
            if J < best[0]:
                best = (J, u, a, b)
    return best[1]


def solve_projected_gradient(scenario, config=None, u0=None):
    """Projected gradient on the discretized problem with eps-continuation.

    Stops each stage when the reference projected step
    |P(u - step0 g) - u|_1 / |u|_1 falls below ``tol_rel``.  Problems with
    linear components are also started (at eps = 0) from the best single
    bang window of :func:`_window_seed`; the lowest final cost wins.
    """
    config = config or SolverConfig(method="projected_gradient")
    t0 = time.perf_counter()
    prob = _Problem(scenario)
    starts = [("initial", _initial(prob, u0), config.smoothing_eps_schedule)]
    if u0 is None:
        window = _window_seed(prob, config)
        if window is not None:
            starts.append(("window", window, (0.0,)))
    best = None
    summary = []
    total_iters = 0
    for label, u_start, schedule in starts:
        u, iters, converged, history, costs = _continuation(prob, u_start, config, schedule)
        J = prob.objective(prob.forward(u), u)
        total_iters += iters
        summary.append({"start": label, "cost": J, "converged": converged, "iterations": iters})
        # costs within TIE_REL are equal to working accuracy (singular arcs are
        # very flat); the earlier start is kept
        if best is None or J < best[0] - TIE_REL * (1.0 + abs(best[0])):
            best = (J, u, converged, history, costs)
    _, u, converged, history, costs = best
    if not converged:
        warnings.warn(f"projected gradient stopped without meeting tol_rel={config.tol_rel:g} "
                      f"(residual {history[-1]:.3e})", MaxItersExceeded, stacklevel=2)
    return _finish(scenario, u, total_iters, converged, history, "projected_gradient", t0, summary, costs)


def solve(scenario, config=None, u0=None):
    config = config or SolverConfig()
    if config.method == "fbsm":
        return solve_fbsm(scenario, config, u0)
    return solve_projected_gradient(scenario, config, u0)


def oracle_size(pieces, levels, n):
    return pieces * levels ** (pieces * n)


def brute_force_oracle(scenario, pieces, levels):
    """Exhaustive search over controls constant on ``pieces`` equal
    subintervals with ``levels`` uniformly spaced values per component."""
    pieces, levels = int(pieces), int(levels)
    n = scenario.n
    if pieces < 1 or levels < 1:
        raise ValueError("pieces and levels must be positive")
    size = oracle_size(pieces, levels, n)
    if size > ORACLE_LIMIT:
        raise SearchSpaceTooLarge(f"pieces * levels^(pieces*n) = {size:.3g} exceeds {ORACLE_LIMIT:.0e}")
    N = scenario.grid_points
    if pieces > N:
        raise ValueError("more pieces than grid intervals")
    prob = _Problem(scenario)
    bounds = np.array([round(p * N / pieces) for p in range(pieces)], dtype=np.int64)
    vals = np.ascontiguousarray([np.linspace(0.0, ub, levels) for ub in prob.u_bar])
    choice, best = kernels.exhaustive_piecewise(prob.y0, prob.h, N, bounds, vals, prob.M, prob.sigma,
                                                prob.mu, prob.rho, prob.beta, prob.w, prob.rexp,
                                                prob.C, prob.q)
    u = np.empty((N + 1, n))
    edges = list(bounds) + [N + 1]
    for p in range(pieces):
        c = int(choice[p])
        for i in range(n):
            u[edges[p]:edges[p + 1], i] = vals[i, c % levels]
            c //= levels
    return {"best_u": ControlTrajectory(prob.grid, u), "best_cost": float(best)}


def uniqueness_probe(scenario, n_starts, t_f_short, config=None, seed=0):
    """Sweep solves from random admissible starts on a shortened horizon
    (same step size); reports the largest pairwise sup-norm gap."""
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    N = max(2, int(round(scenario.grid_points * t_f_short / scenario.t_f)))
    short = scenario.replace(t_f=float(t_f_short), grid_points=N)
    rng = np.random.default_rng(seed)
    controls = []
    converged = []
    for _ in range(n_starts):
        u0 = rng.uniform(0.0, 1.0, (N + 1, short.n)) * short.model.u_bar
        rep = solve_fbsm(short, config, u0=u0)
        controls.append(rep.u_opt.u)
        converged.append(rep.converged)
    gap = 0.0
    for a in range(n_starts):
        for b in range(a + 1, n_starts):
            gap = max(gap, float(np.abs(controls[a] - controls[b]).max()))
    return {"max_pairwise_u_gap": gap, "all_converged": all(converged), "grid_points": N}
