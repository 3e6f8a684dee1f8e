"""Scenario documents (JSON) and CSV / JSON artifacts."""

import hashlib
import json
import os

import numpy as np

from .dynamics import UNDERSHOOT_TOL, ControlTrajectory
from .errors import ParseError, ValidationError
from .model import CostSpec, EpidemicModel, InitialState, Scenario, validate_scenario

_SCHEMA = {
    "model": ("n", "M", "sigma", "mu", "rho", "beta_bar", "u_bar"),
    "init": ("s0", "x0", "r0"),
    "cost": ("w", "rexp", "C", "q"),
    "horizon": ("t_f", "grid_points"),
}
CSV_FMT = "%.17g"


def scenario_to_dict(scenario):
    m, i, c = scenario.model, scenario.init, scenario.cost
    return {
        "name": scenario.name,
        "model": {"n": m.n, "M": m.M.tolist(), "sigma": m.sigma.tolist(), "mu": m.mu.tolist(),
                  "rho": float(m.rho), "beta_bar": m.beta_bar.tolist(), "u_bar": m.u_bar.tolist()},
        "init": {"s0": float(i.s0), "x0": i.x0.tolist(), "r0": float(i.r0)},
        "cost": {"w": c.w.tolist(), "rexp": c.rexp.tolist(), "C": c.C.tolist(), "q": c.q.tolist()},
        "horizon": {"t_f": float(scenario.t_f), "grid_points": int(scenario.grid_points)},
    }


def _get(doc, section, key):
    if not isinstance(doc.get(section), dict):
        raise ParseError(f"missing key '{section}'")
    if key not in doc[section]:
        raise ParseError(f"missing key '{section}.{key}'")
    return doc[section][key]


def _vector(doc, section, key, n):
    raw = _get(doc, section, key)
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"'{section}.{key}' must be numeric") from None
    if arr.shape != (n,):
        raise ParseError(f"'{section}.{key}' must have length {n}, got shape {list(arr.shape)}")
    return arr


def _scalar(doc, section, key):
    raw = _get(doc, section, key)
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ParseError(f"'{section}.{key}' must be a number")
    return float(raw)


def scenario_from_dict(doc, validate=True):
    """Build a Scenario from a parsed document; ParseError names the key."""
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be an object")
    for section, keys in _SCHEMA.items():
        for key in keys:
            _get(doc, section, key)
    n = _get(doc, "model", "n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ParseError("'model.n' must be a positive integer")
    try:
        M = np.asarray(_get(doc, "model", "M"), dtype=float)
    except (TypeError, ValueError):
        raise ParseError("'model.M' must be an array of numeric rows") from None
    if M.shape != (n, n):
        raise ParseError(f"'model.M' must be {n}x{n}, got shape {list(M.shape)}")
    N = _get(doc, "horizon", "grid_points")
    if isinstance(N, bool) or not isinstance(N, int):
        raise ParseError("'horizon.grid_points' must be an integer")
    model = EpidemicModel(M=M, sigma=_vector(doc, "model", "sigma", n), mu=_vector(doc, "model", "mu", n),
                          rho=_scalar(doc, "model", "rho"), beta_bar=_vector(doc, "model", "beta_bar", n),
                          u_bar=_vector(doc, "model", "u_bar", n))
    init = InitialState(s0=_scalar(doc, "init", "s0"), x0=_vector(doc, "init", "x0", n),
                        r0=_scalar(doc, "init", "r0"))
    cost = CostSpec(w=_vector(doc, "cost", "w", n), rexp=_vector(doc, "cost", "rexp", n),
                    C=_vector(doc, "cost", "C", n), q=_vector(doc, "cost", "q", n))
    name = doc.get("name", "")
    scenario = Scenario(model=model, init=init, cost=cost, t_f=_scalar(doc, "horizon", "t_f"),
                        grid_points=N, name=name if isinstance(name, str) else "")
    if validate:
        report = validate_scenario(scenario)
        if not report.ok:
            raise ValidationError(report.violations)
    return scenario


def loads_scenario(text, validate=True):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc, validate)


def load_scenario(path, validate=True):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads_scenario(text, validate)


def save_scenario(path, scenario):
    write_json(path, scenario_to_dict(scenario))


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _clean(a):
    """Zero out undershoot within integrator tolerance (for logs only)."""
    a = np.array(a, dtype=float)
    a[(a < 0.0) & (a >= -UNDERSHOOT_TOL)] = 0.0
    return a


def _write_csv(path, header, columns):
    data = np.column_stack(columns)
    np.savetxt(path, data, fmt=CSV_FMT, delimiter=",", header=",".join(header), comments="")


def write_trajectory_csv(path, traj):
    n = traj.n
    header = ["t", "s"] + [f"x{i + 1}" for i in range(n)] + ["r", "d"]
    _write_csv(path, header, [traj.grid, _clean(traj.s), _clean(traj.x), _clean(traj.r), _clean(traj.d)])


def write_control_csv(path, control):
    n = control.u.shape[1]
    _write_csv(path, ["t"] + [f"u{i + 1}" for i in range(n)], [control.grid, control.u])


def write_costates_csv(path, costates, H):
    n = costates.p_x.shape[1]
    header = (["t", "p_s"] + [f"p_x{i + 1}" for i in range(n)] + ["p_r", "eta"]
              + [f"Psi{i + 1}" for i in range(n)] + ["H"])
    _write_csv(path, header, [costates.grid, costates.p_s, costates.p_x, costates.p_r, costates.eta,
                              costates.Psi, np.asarray(H)])


def read_control_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "t" or len(header) < 2:
            raise ParseError(f"{path}: expected header 't,u1..un'")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None
    if data.shape[1] != len(header):
        raise ParseError(f"{path}: {data.shape[1]} columns, header has {len(header)}")
    return ControlTrajectory(data[:, 0], data[:, 1:])


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, source, config, files, extra=None):
    """manifest.json listing every emitted file with its SHA-256."""
    entries = [{"file": f, "sha256": sha256(os.path.join(out_dir, f))} for f in files]
    doc = {"source": source, "config": config, "output_dir": os.path.abspath(out_dir), "files": entries}
    if extra:
        doc.update(extra)
    write_json(os.path.join(out_dir, "manifest.json"), doc)
    return doc
