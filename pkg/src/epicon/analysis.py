"""Structure of computed controls: bang / singular / interior labelling,
singular-arc detection and physical checks along detected arcs."""

import math
from dataclasses import dataclass

import numpy as np

from . import pmp
from .errors import NoLinearComponents, NotApplicable, NotSIR, NonconvexNu
from .model import hess_nu_diag

MIN_RUN = 3
LABEL_REL_TOL = 1e-3
SINGULAR_REL_TOL = 5e-2

_DISPLAY = {"zero": "bang(0)", "max": "bang(max)", "singular": "singular", "interior": "interior"}


@dataclass(frozen=True)
class Segment:
    label: str
    k_a: int
    k_b: int  # inclusive
    t_a: float
    t_b: float

    @property
    def nodes(self):
        return self.k_b - self.k_a + 1


@dataclass(frozen=True)
class ControlStructure:
    segments: tuple  # one tuple of Segment per component
    switch_times: tuple

    @property
    def intervals(self):
        return [[(s.t_a, s.t_b, s.label) for s in comp] for comp in self.segments]

    @property
    def sequences(self):
        return ["-".join(_DISPLAY[s.label] for s in comp) for comp in self.segments]

    @property
    def sequence_string(self):
        return " | ".join(self.sequences)

    @property
    def pattern(self):
        """Sequence with both bang values written as plain ``bang``."""
        return self.sequence_string.replace("bang(0)", "bang").replace("bang(max)", "bang")

    def arcs(self, label="singular"):
        return [(i, s) for i, comp in enumerate(self.segments) for s in comp if s.label == label]

    def to_dict(self):
        return {
            "sequence_string": self.sequence_string,
            "pattern": self.pattern,
            "switch_times": list(self.switch_times),
            "components": [
                [{"label": s.label, "t_a": s.t_a, "t_b": s.t_b, "k_a": s.k_a, "k_b": s.k_b} for s in comp]
                for comp in self.segments
            ],
        }


def _runs(labels):
    out = []
    start = 0
    for k in range(1, len(labels) + 1):
        if k == len(labels) or labels[k] != labels[start]:
            out.append([labels[start], start, k - 1])
            start = k
    return out


def _coalesce(runs):
    out = []
    for r in runs:
        if out and out[-1][0] == r[0]:
            out[-1][2] = r[2]
        else:
            out.append(list(r))
    return out


def merge_runs(labels, min_run=MIN_RUN):
    """Label runs as ``[label, k_a, k_b]`` after absorbing runs shorter than
    ``min_run`` nodes into the longer neighbour (the left one on ties)."""
    runs = _coalesce(_runs(list(labels)))
    while len(runs) > 1:
        short = next((j for j, r in enumerate(runs) if r[2] - r[1] + 1 < min_run), None)
        if short is None:
            break
        size = lambda j: runs[j][2] - runs[j][1] + 1  # noqa: E731
        if short == 0:
            target = 1
        elif short == len(runs) - 1:
            target = short - 1
        else:
            target = short - 1 if size(short - 1) >= size(short + 1) else short + 1
        runs[short][0] = runs[target][0]
        runs = _coalesce(runs)
    return runs


def node_labels(control, u_bar, costates=None, cost=None, tol_label=None, tol_sing=None):
    """Per-node labels, array of shape (N + 1, n) with entries
    'zero' / 'max' / 'singular' / 'interior'."""
    u = control.u
    u_bar = np.broadcast_to(np.asarray(u_bar, dtype=float), (u.shape[1],))
    tl = LABEL_REL_TOL * u_bar if tol_label is None else np.broadcast_to(tol_label, u_bar.shape)
    labels = np.full(u.shape, "interior", dtype=object)
    if costates is not None and cost is not None:
        ts = SINGULAR_REL_TOL * cost.C if tol_sing is None else np.broadcast_to(tol_sing, u_bar.shape)
        sing = (cost.q == 1.0) & (np.abs(costates.Psi - cost.C) <= ts)
        labels[sing] = "singular"
    labels[u >= u_bar - tl] = "max"
    labels[u <= tl] = "zero"
    return labels


def classify_structure(control, u_bar, costates=None, cost=None, tol_label=None, tol_sing=None):
    grid = control.grid
    labels = node_labels(control, u_bar, costates, cost, tol_label, tol_sing)
    segments = []
    switches = set()
    last = grid.size - 1
    for i in range(labels.shape[1]):
        comp = []
        for lab, a, b in merge_runs(labels[:, i]):
            t_b = float(grid[b + 1]) if b < last else float(grid[-1])
            comp.append(Segment(lab, a, b, float(grid[a]), t_b))
            if a > 0:
                switches.add(float(grid[a]))
        segments.append(tuple(comp))
    return ControlStructure(tuple(segments), tuple(sorted(switches)))


@dataclass(frozen=True)
class SingularArc:
    component: int
    k_a: int
    k_b: int
    t_a: float
    t_b: float


def detect_singular_arcs(costates, cost, tol_sing=None, min_nodes=MIN_RUN, control=None, u_bar=None,
                         tol_label=None):
    """Maximal runs of at least ``min_nodes`` nodes with |Psi_i - C_i| <= tol_sing.

    When ``control`` and ``u_bar`` are given, nodes where the control sits at
    a bound are excluded, so a steep crossing of the threshold inside a bang
    region is not mistaken for an arc.
    """
    lin = np.flatnonzero(cost.q == 1.0)
    if lin.size == 0:
        raise NoLinearComponents("no component has a linear control cost")
    ts = SINGULAR_REL_TOL * cost.C if tol_sing is None else np.broadcast_to(np.asarray(tol_sing, float), cost.C.shape)
    hit = np.abs(costates.Psi - cost.C) <= ts
    if control is not None and u_bar is not None:
        ub = np.broadcast_to(np.asarray(u_bar, dtype=float), cost.C.shape)
        tl = LABEL_REL_TOL * ub if tol_label is None else tol_label
        hit &= (control.u > tl) & (control.u < ub - tl)
    grid = costates.grid
    arcs = []
    for i in lin:
        for val, a, b in _runs(list(hit[:, i])):
            if val and b - a + 1 >= min_nodes:
                arcs.append(SingularArc(int(i), a, b, float(grid[a]), float(grid[b])))
    return arcs


@dataclass(frozen=True)
class ArcDiagnostics:
    feedback_residual_max: float
    x_monotone_decreasing: bool
    s_at_entry: float
    entry_label: str
    exit_label: str
    discontinuity_jump_at_entry: float
    discontinuity_jump_at_exit: float
    interior: tuple  # (k_first, k_last) nodes used for the checks
    s_threshold: float  # gamma/beta_bar


def _as_arc(arc, grid):
    if isinstance(arc, SingularArc):
        return arc.component, arc.k_a, arc.k_b
    if isinstance(arc, Segment):
        return 0, arc.k_a, arc.k_b
    if isinstance(arc, tuple) and len(arc) == 2 and isinstance(arc[1], Segment):
        return arc[0], arc[1].k_a, arc[1].k_b
    i, a, b = arc
    return int(i), int(a), int(b)


def _label_at(labels, k):
    if k < 0 or k >= labels.size:
        return "none"
    return str(labels[k])


def verify_singular_arc(scenario, report, arc, margin=0.1):
    """Physical checks along one arc of a solved n = 1, rho = 0 problem.

    ``margin`` is the fraction of arc nodes dropped at each end (at least one
    node) before the feedback and monotonicity checks, since the discrete
    solution needs a few steps to settle onto the arc after a jump.
    """
    model, cost = scenario.model, scenario.cost
    if model.n != 1 or model.rho != 0.0:
        raise NotApplicable("arc verification needs n = 1 and rho = 0")
    if hess_nu_diag(cost, np.zeros(1))[0] <= 0.0:
        raise NotApplicable("feedback law degenerates: nu'' = 0")
    i, a, b = _as_arc(arc, report.u_opt.grid)
    m = max(1, math.ceil(margin * (b - a + 1)))
    lo, hi = a + m, b - m
    if hi < lo:
        raise NotApplicable("arc too short for interior checks")
    traj, P, u = report.traj, report.costates, report.u_opt.u[:, i]
    ks = np.arange(lo, hi + 1)
    try:
        u_fb, _ = pmp.feedback_singular_n1(model, cost, traj.s[ks], traj.x[ks, 0], P.eta[ks])
    except (NotSIR, NonconvexNu) as exc:
        raise NotApplicable(str(exc)) from exc
    resid = float(np.max(np.abs(u[ks] - u_fb)))
    dx = np.diff(traj.x[lo:hi + 1, 0])
    labels = node_labels(report.u_opt, model.u_bar, P, cost)[:, i]
    n_last = u.size - 1
    return ArcDiagnostics(
        feedback_residual_max=resid,
        x_monotone_decreasing=bool(np.all(dx < 0.0)),
        s_at_entry=float(traj.s[a]),
        entry_label=_label_at(labels, a - 1),
        exit_label=_label_at(labels, b + 1),
        discontinuity_jump_at_entry=float(abs(u[a] - u[a - 1])) if a > 0 else 0.0,
        discontinuity_jump_at_exit=float(abs(u[b + 1] - u[b])) if b < n_last else 0.0,
        interior=(int(lo), int(hi)),
        s_threshold=float(model.gamma / model.beta_bar[0]),
    )


def terminal_deactivation_check(control, costates, cost, min_nodes=MIN_RUN, atol=1e-12):
    """True iff every linear component vanishes on the last ``min_nodes`` nodes."""
    del costates  # the check is on the control; kept for a uniform call shape
    lin = np.flatnonzero(cost.q == 1.0)
    if lin.size == 0:
        return False
    tail = control.u[-min_nodes:, lin]
    return bool(np.all(np.abs(tail) <= atol))
