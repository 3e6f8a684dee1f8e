"""Epidemic model coefficients, initial data, running costs and presets."""

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import UnknownPreset

CLOSED_POPULATION_TOL = 1e-12


def _frozen_array(values, ndim):
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        arr = np.atleast_1d(arr) if ndim == 1 else np.atleast_2d(arr)
    arr.setflags(write=False)
    return arr


class _ArrayRecord:
    """Value equality for frozen dataclasses holding numpy arrays."""

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


@dataclass(frozen=True, eq=False)
class EpidemicModel(_ArrayRecord):
    """Coefficients of the n-compartment model (rates in 1/day).

    ``M`` moves people between the exposed/infected compartments, ``sigma``
    and ``mu`` send them to recovered and deceased, ``rho`` returns recovered
    to susceptible, ``beta_bar`` is the uncontrolled transmission and
    ``u_bar`` the largest admissible transmission reduction.
    """

    M: np.ndarray
    sigma: np.ndarray
    mu: np.ndarray
    rho: float
    beta_bar: np.ndarray
    u_bar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", _frozen_array(self.M, 2))
        for name in ("sigma", "mu", "beta_bar", "u_bar"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), 1))
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def n(self):
        return self.M.shape[0]

    @property
    def gamma(self):
        """Exit rate of the single infected class (n = 1 models)."""
        return -float(self.M[0, 0])


@dataclass(frozen=True, eq=False)
class InitialState(_ArrayRecord):
    s0: float
    x0: np.ndarray
    r0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "s0", float(self.s0))
        object.__setattr__(self, "x0", _frozen_array(self.x0, 1))
        object.__setattr__(self, "r0", float(self.r0))

    def as_state(self, d0=0.0):
        """Flat state row ``[s, x_1..x_n, r, d]``."""
        return np.concatenate(([self.s0], self.x0, [self.r0, d0]))


@dataclass(frozen=True, eq=False)
class CostSpec(_ArrayRecord):
    """Running cost  sum_i w_i x_i**rexp_i + sum_i C_i u_i**q_i."""

    w: np.ndarray
    rexp: np.ndarray
    C: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, _frozen_array(getattr(self, f.name), 1))

    @property
    def linear(self):
        return self.q == 1.0

    @property
    def superlinear(self):
        return self.q > 1.0


@dataclass(frozen=True, eq=False)
class Scenario(_ArrayRecord):
    model: EpidemicModel
    init: InitialState
    cost: CostSpec
    t_f: float = 360.0
    grid_points: int = 3600
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "t_f", float(self.t_f))
        object.__setattr__(self, "grid_points", int(self.grid_points))

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (self.model == other.model and self.init == other.init
                and self.cost == other.cost and self.t_f == other.t_f
                and self.grid_points == other.grid_points)

    @property
    def n(self):
        return self.model.n

    @property
    def step(self):
        return self.t_f / self.grid_points

    def grid(self):
        return np.linspace(0.0, self.t_f, self.grid_points + 1)

    def replace(self, **changes):
        return replace(self, **changes)


# -- running cost in the state -------------------------------------------------

def eval_nu(cost, x):
    """nu(x) = sum_i w_i x_i**rexp_i; ``x`` may be (n,) or (K, n)."""
    x = np.asarray(x, dtype=float)
    return np.sum(cost.w * x ** cost.rexp, axis=-1)


def grad_nu(cost, x):
    x = np.asarray(x, dtype=float)
    return np.where(cost.rexp == 1.0, cost.w, cost.w * cost.rexp * x ** (cost.rexp - 1.0))


def hess_nu_diag(cost, x):
    x = np.asarray(x, dtype=float)
    # only rexp in {1, 2} is supported, so the Hessian is constant in x
    return np.broadcast_to(cost.w * cost.rexp * (cost.rexp - 1.0), x.shape).copy()


# -- validation ---------------------------------------------------------------

@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def extend(self, other):
        self.violations.extend(other.violations)
        return self


def _in_unit(values):
    return bool(np.all((values >= 0.0) & (values <= 1.0)))


def validate_model(model):
    bad = []
    n = model.n
    M = model.M
    if M.ndim != 2 or M.shape != (n, n):
        return ValidationReport([f"M must be square, got shape {M.shape}"])
    for name in ("sigma", "mu", "beta_bar", "u_bar"):
        v = getattr(model, name)
        if v.shape != (n,):
            bad.append(f"{name} must have length {n}, got {v.shape[0]}")
    if bad:
        return ValidationReport(bad)
    arrays = [M, model.sigma, model.mu, model.beta_bar, model.u_bar, np.array([model.rho])]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        return ValidationReport(["coefficients must be finite"])

    for i in range(n):
        for j in range(i + 1, n):
            if M[i, j] != 0.0:
                bad.append(f"M not lower triangular: M[{i + 1}][{j + 1}] = {M[i, j]:g}")
            if M[j, i] < 0.0:
                bad.append(f"M not Metzler: M[{j + 1}][{i + 1}] = {M[j, i]:g} < 0")
    residual = M.sum(axis=0) + model.sigma + model.mu
    for h in range(n):
        if abs(residual[h]) > CLOSED_POPULATION_TOL:
            bad.append(f"closed-population residual {residual[h]:g} in column {h + 1}")
    if not np.all(np.abs(M) <= 1.0):
        bad.append("entries of |M| must lie in [0,1]")
    if not _in_unit(model.sigma):
        bad.append("sigma must lie in [0,1]")
    if not _in_unit(model.mu):
        bad.append("mu must lie in [0,1]")
    if not 0.0 <= model.rho <= 1.0:
        bad.append(f"rho = {model.rho:g} outside [0,1]")
    if not np.all((model.beta_bar > 0.0) & (model.beta_bar < 1.0)):
        bad.append("beta_bar must lie in (0,1)")
    if not np.all((model.u_bar > 0.0) & (model.u_bar <= model.beta_bar)):
        bad.append("u_bar must satisfy 0 < u_bar <= beta_bar")
    return ValidationReport(bad)


def validate_init(init, n):
    bad = []
    x0 = init.x0
    if x0.shape != (n,):
        return ValidationReport([f"x0 must have length {n}, got {x0.shape[0]}"])
    if not (np.isfinite(init.s0) and np.isfinite(init.r0) and np.all(np.isfinite(x0))):
        return ValidationReport(["initial state must be finite"])
    if not 0.0 <= init.s0 <= 1.0:
        bad.append(f"s0 = {init.s0:g} outside [0,1]")
    if not 0.0 <= init.r0 <= 1.0:
        bad.append(f"r0 = {init.r0:g} outside [0,1]")
    if not _in_unit(x0):
        bad.append("x0 entries must lie in [0,1]")
    total = init.s0 + x0.sum() + init.r0
    if total > 1.0 + CLOSED_POPULATION_TOL:
        bad.append(f"total exceeds 1 (s0 + sum x0 + r0 = {total:g})")
    if not x0[0] > 0.0:
        bad.append("x0[1] must be strictly positive")
    return ValidationReport(bad)


def validate_cost(cost, n):
    bad = []
    for f in fields(cost):
        v = getattr(cost, f.name)
        if v.shape != (n,):
            bad.append(f"cost.{f.name} must have length {n}, got {v.shape[0]}")
    if bad:
        return ValidationReport(bad)
    if not np.all(cost.C > 0.0):
        bad.append("C must be strictly positive")
    if not np.all((cost.q >= 1.0) & (cost.q <= 2.0)):
        bad.append("q out of [1,2]")
    if not np.all(cost.w >= 0.0):
        bad.append("w must be nonnegative")
    if not np.all(np.isin(cost.rexp, (1.0, 2.0))):
        bad.append("rexp entries must be 1 or 2")
    return ValidationReport(bad)


def validate_scenario(scenario):
    report = validate_model(scenario.model)
    n = scenario.model.n
    report.extend(validate_init(scenario.init, n))
    report.extend(validate_cost(scenario.cost, n))
    if not scenario.t_f > 0.0:
        report.violations.append(f"t_f = {scenario.t_f:g} must be positive")
    if scenario.grid_points < 2:
        report.violations.append(f"grid_points = {scenario.grid_points} must be >= 2")
    return report


# -- presets ------------------------------------------------------------------

# Reference SIR: beta_bar = 0.16, gamma = 0.06, i0 = 0.001, s0 = 0.999, 360 days.
_BETA = 0.16
_GAMMA = 0.06


def _sir(u_bar, rho=0.0):
    return EpidemicModel(M=[[-_GAMMA]], sigma=[_GAMMA], mu=[0.0], rho=rho,
                         beta_bar=[_BETA], u_bar=[u_bar])


_SIR_INIT = InitialState(s0=0.999, x0=[0.001], r0=0.0)
_QQ = CostSpec(w=[1.0], rexp=[2.0], C=[1.0], q=[2.0])
_QL = CostSpec(w=[30.0], rexp=[2.0], C=[1.0], q=[1.0])
_LL = CostSpec(w=[2.0], rexp=[1.0], C=[1.0], q=[1.0])


def _quadratic(n, w=1.0, C=1.0):
    return CostSpec(w=[w] * n, rexp=[2.0] * n, C=[C] * n, q=[2.0] * n)


def _seir(rho):
    # exposed (incubation 5 d) -> infected (recovery ~ 17 d); exposed carry a
    # small placeholder transmission so that beta_bar stays in (0,1)
    a, g = 0.2, _GAMMA
    return EpidemicModel(M=[[-a, 0.0], [a, -g]], sigma=[0.0, g], mu=[0.0, 0.0], rho=rho,
                         beta_bar=[0.01, _BETA], u_bar=[0.005, 0.08])


def _covid_n5():
    # x = (I, D, A, R, T) with the sparsity of the 5-class COVID-19 model.
    # PLACEHOLDER rates: round numbers of plausible magnitude, not fitted values.
    eps, zeta, lam = 0.15, 0.12, 0.03
    eta, rho_d = 0.12, 0.03
    theta, mu_a, kappa = 0.35, 0.02, 0.02
    nu, xi = 0.03, 0.02
    sig_t, tau = 0.02, 0.01
    M = [
        [-(eps + zeta + lam), 0.0, 0.0, 0.0, 0.0],
        [eps, -(eta + rho_d), 0.0, 0.0, 0.0],
        [zeta, 0.0, -(theta + mu_a + kappa), 0.0, 0.0],
        [0.0, eta, theta, -(nu + xi), 0.0],
        [0.0, 0.0, mu_a, nu, -(sig_t + tau)],
    ]
    beta = np.array([0.5, 0.01, 0.4, 0.01, 0.001])
    return EpidemicModel(M=M, sigma=[lam, rho_d, kappa, xi, sig_t], mu=[0, 0, 0, 0, tau],
                         rho=0.0, beta_bar=beta, u_bar=0.5 * beta)


def _covid_n3():
    # x = (e, a, i): exposed, asymptomatic, symptomatic.  PLACEHOLDER rates.
    latent, kappa, rec_a, rec_i, death, waning = 0.2, 0.1, 0.1, 0.1, 0.005, 0.005
    M = [
        [-latent, 0.0, 0.0],
        [latent, -(kappa + rec_a), 0.0],
        [0.0, kappa, -(rec_i + death)],
    ]
    beta = np.array([0.001, 0.2, 0.3])
    return EpidemicModel(M=M, sigma=[0.0, rec_a, rec_i], mu=[0.0, 0.0, death],
                         rho=waning, beta_bar=beta, u_bar=0.5 * beta)


def _influenza_n3():
    # x = (e, i, a): exposed, symptomatic, asymptomatic.  PLACEHOLDER rates.
    kappa, p, alpha, eta, f = 0.5, 0.67, 0.25, 0.25, 0.02
    M = [
        [-kappa, 0.0, 0.0],
        [p * kappa, -alpha, 0.0],
        [(1.0 - p) * kappa, 0.0, -eta],
    ]
    beta = np.array([0.05, 0.3, 0.15])
    return EpidemicModel(M=M, sigma=[0.0, (1.0 - f) * alpha, eta], mu=[0.0, f * alpha, 0.0],
                         rho=0.0, beta_bar=beta, u_bar=0.5 * beta)


def _literature_init(n):
    return InitialState(s0=0.999, x0=[0.001] + [0.0] * (n - 1), r0=0.0)


def _build_presets():
    table = {
        "sir_paper_qq_008": (_sir(0.08), _SIR_INIT, _QQ),
        "sir_paper_qq_004": (_sir(0.04), _SIR_INIT, _QQ),
        "sir_paper_ql_01": (_sir(0.1), _SIR_INIT, _QL),
        "sir_paper_ql_008": (_sir(0.08), _SIR_INIT, _QL),
        "sir_paper_ll_01": (_sir(0.1), _SIR_INIT, _LL),
        "sirs": (_sir(0.08, rho=1.0 / 180.0), _SIR_INIT, _QQ),
        "seir": (_seir(0.0), _literature_init(2), _quadratic(2)),
        "seirs": (_seir(1.0 / 180.0), _literature_init(2), _quadratic(2)),
        "covid_n5": (_covid_n5(), _literature_init(5), _quadratic(5)),
        "covid_n3": (_covid_n3(), _literature_init(3), _quadratic(3)),
        "influenza_n3": (_influenza_n3(), _literature_init(3), _quadratic(3)),
    }
    return {name: Scenario(model=m, init=i, cost=c, t_f=360.0, grid_points=3600, name=name)
            for name, (m, i, c) in table.items()}


_PRESETS = _build_presets()
PRESET_NAMES = tuple(_PRESETS)
PAPER_PRESETS = tuple(n for n in PRESET_NAMES if n.startswith("sir_paper"))


def preset(name):
    """Return the named scenario; raises UnknownPreset."""
    try:
        return _PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None
