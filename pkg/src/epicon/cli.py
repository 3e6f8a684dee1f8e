"""Command-line runner: ``epicon {simulate,solve,analyze,presets,validate}``.

Exit codes: 0 success, 1 invalid input, 2 solver did not converge (files are
still written), 3 I/O error.
"""

import argparse
import datetime
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io, pmp
from .analysis import (
    classify_structure,
    detect_singular_arcs,
    terminal_deactivation_check,
    verify_singular_arc,
)
from .dynamics import ControlTrajectory, epidemic_metrics, simulate_forward
from .errors import EpiconError, MaxItersExceeded, NotApplicable, ParseError, ValidationError
from .model import PRESET_NAMES, preset, validate_scenario
from .solver import SolverConfig, cost_evaluate, solve

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_IO = 0, 1, 2, 3
DEFAULT_OUT = "epicon_out"


class _InputError(Exception):
    pass


def _out_dir(args):
    return args.out or os.environ.get("EPICON_OUT") or DEFAULT_OUT


def _load(args, name=None):
    """Scenario from --preset (or ``name``) or --scenario, with --grid applied."""
    if name is not None:
        scenario, source = preset(name), name
    elif args.scenario:
        scenario, source = io.load_scenario(args.scenario), os.path.abspath(args.scenario)
    elif args.preset:
        scenario, source = preset(args.preset[0]), args.preset[0]
    else:
        raise _InputError("give --preset NAME or --scenario PATH")
    if getattr(args, "grid", None):
        scenario = scenario.replace(grid_points=args.grid)
        report = validate_scenario(scenario)
        if not report.ok:
            raise ValidationError(report.violations)
    return scenario, source


def _control_from_arg(scenario, spec):
    if spec in (None, "zero"):
        return ControlTrajectory.zeros(scenario)
    if spec == "max":
        return ControlTrajectory.upper(scenario)
    try:
        value = float(spec)
    except ValueError:
        control = io.read_control_csv(spec)
        if control.u.shape[0] != scenario.grid_points + 1:
            raise _InputError(f"{spec}: {control.u.shape[0]} rows, scenario grid has {scenario.grid_points + 1}")
        control = ControlTrajectory(scenario.grid(), control.u)
    else:
        control = ControlTrajectory.constant(scenario, value)
    if not control.admissible(scenario.model.u_bar):
        raise _InputError("control violates the box 0 <= u <= u_bar")
    return control


def _write_run(out, scenario, traj, control, costates, report, source, config):
    os.makedirs(out, exist_ok=True)
    H = pmp.hamiltonian_path(scenario, traj, control, costates)
    io.write_trajectory_csv(os.path.join(out, "trajectory.csv"), traj)
    io.write_control_csv(os.path.join(out, "control.csv"), control)
    io.write_costates_csv(os.path.join(out, "costates.csv"), costates, H)
    report = dict(report)
    report["scenario"] = io.scenario_to_dict(scenario)
    report["source"] = source
    report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    report["files"] = {"trajectory": "trajectory.csv", "control": "control.csv", "costates": "costates.csv"}
    io.write_json(os.path.join(out, "report.json"), report)
    files = ["trajectory.csv", "control.csv", "costates.csv", "report.json"]
    io.write_manifest(out, source, config, files)


def _arc_summary(scenario, rep):
    """Diagnostics of every singular segment when the n = 1 checks apply."""
    out = []
    for i, seg in rep.structure.arcs():
        entry = {"component": i + 1, "t_a": seg.t_a, "t_b": seg.t_b}
        try:
            d = verify_singular_arc(scenario, rep, (i, seg))
        except NotApplicable as exc:
            entry["not_applicable"] = exc.reason
        else:
            entry.update(feedback_residual_max=d.feedback_residual_max,
                         x_monotone_decreasing=d.x_monotone_decreasing, s_at_entry=d.s_at_entry,
                         entry_label=d.entry_label, jump_at_entry=d.discontinuity_jump_at_entry,
                         jump_at_exit=d.discontinuity_jump_at_exit)
        out.append(entry)
    return out


def _solve_one(args, name=None):
    scenario, source = _load(args, name)
    method = args.method or ("fbsm" if np.all(scenario.cost.q > 1.0) else "projected_gradient")
    cfg = SolverConfig(method=method, **({"tol_rel": args.tol} if args.tol else {}))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxItersExceeded)
        rep = solve(scenario, cfg)
    k = pmp.hamiltonian_constant_check(scenario, rep.traj, rep.u_opt, rep.costates)["k_expected"]
    report = {
        "kind": "solve",
        "method": cfg.method,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "cost_value": rep.cost_value,
        "final_residual": rep.residual_history[-1] if rep.residual_history else 0.0,
        "hamiltonian_k": k,
        "hamiltonian_deviation": rep.hamiltonian_deviation,
        "eta_min": float(rep.costates.eta.min()),
        "structure": rep.structure.to_dict(),
        "metrics": epidemic_metrics(rep.traj),
        "starts": rep.starts,
    }
    if np.any(scenario.cost.q == 1.0):
        report["singular_arcs"] = _arc_summary(scenario, rep)
        report["terminal_deactivation"] = terminal_deactivation_check(rep.u_opt, rep.costates, scenario.cost)
    config = {"method": cfg.method, "tol_rel": cfg.tol_rel, "max_iters": cfg.max_iters,
              "grid_points": scenario.grid_points}
    out = _out_dir(args)
    if name is not None and len(args.preset) > 1:
        out = os.path.join(out, name)
    _write_run(out, scenario, rep.traj, rep.u_opt, rep.costates, report, source, config)
    return source, out, report


def _summary_line(source, out, report):
    status = "converged" if report["converged"] else "NOT converged"
    return (f"{source}: {status} after {report['iterations']} iterations, cost {report['cost_value']:.10g}, "
            f"structure {report['structure']['sequence_string']}, H deviation "
            f"{report['hamiltonian_deviation']:.2e} -> {out}")


def cmd_solve(args):
    names = args.preset if (args.preset and not args.scenario) else [None]
    if len(names) > 1 and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_solve_one, [args] * len(names), names))
    elif names == [None]:
        results = [_solve_one(args)]
    else:
        results = [_solve_one(args, n) for n in names]
    for res in results:
        print(_summary_line(*res))
    return EXIT_OK if all(r[2]["converged"] for r in results) else EXIT_NOT_CONVERGED


def cmd_simulate(args):
    scenario, source = _load(args)
    control = _control_from_arg(scenario, args.control)
    traj = simulate_forward(scenario, control)
    costates = pmp.integrate_adjoint(scenario, traj, control)
    report = {
        "kind": "simulate",
        "control": args.control or "zero",
        "cost_value": cost_evaluate(scenario, traj, control),
        "conservation_error": float(np.max(np.abs(traj.total - traj.total[0]))),
        "metrics": epidemic_metrics(traj),
    }
    out = _out_dir(args)
    _write_run(out, scenario, traj, control, costates, report, source, {"control": report["control"]})
    m = report["metrics"]
    print(f"{source}: cost {report['cost_value']:.10g}, peak {m['peak_infected']:.6g} at t = {m['peak_time']:g}, "
          f"conservation error {report['conservation_error']:.2e} -> {out}")
    return EXIT_OK


def cmd_analyze(args):
    out = _out_dir(args)
    with open(os.path.join(out, "report.json"), encoding="utf-8") as fh:
        saved = json.load(fh)
    scenario = io.scenario_from_dict(saved["scenario"])
    control = io.read_control_csv(os.path.join(out, "control.csv"))
    control = ControlTrajectory(scenario.grid(), control.u)
    traj = simulate_forward(scenario, control)
    costates = pmp.integrate_adjoint(scenario, traj, control)
    structure = classify_structure(control, scenario.model.u_bar, costates, scenario.cost)
    check = pmp.hamiltonian_constant_check(scenario, traj, control, costates)
    doc = {
        "source": saved.get("source"),
        "cost_value": cost_evaluate(scenario, traj, control),
        "structure": structure.to_dict(),
        "hamiltonian_k": check["k_expected"],
        "hamiltonian_deviation": check["max_deviation"],
        "eta_min": float(costates.eta.min()),
        "metrics": epidemic_metrics(traj),
    }
    if np.any(scenario.cost.q == 1.0):
        arcs = detect_singular_arcs(costates, scenario.cost, control=control, u_bar=scenario.model.u_bar)
        doc["singular_arcs_by_switching_function"] = [
            {"component": a.component + 1, "t_a": a.t_a, "t_b": a.t_b} for a in arcs]
        doc["terminal_deactivation"] = terminal_deactivation_check(control, costates, scenario.cost)
    io.write_json(os.path.join(out, "structure.json"), doc)
    print(f"{doc['source']}: {structure.sequence_string}; switch times "
          f"{', '.join(f'{t:g}' for t in structure.switch_times) or 'none'}; "
          f"H deviation {check['max_deviation']:.2e}")
    return EXIT_OK


def cmd_presets(args):
    for name in PRESET_NAMES:
        sc = preset(name)
        kind = "linear" if np.all(sc.cost.q == 1.0) else "superlinear" if np.all(sc.cost.q > 1.0) else "mixed"
        print(f"{name:18s} n={sc.n}  rho={sc.model.rho:.4g}  u_bar={sc.model.u_bar.tolist()}  control cost {kind}")
    return EXIT_OK


def cmd_validate(args):
    scenario, source = _load(args)
    print(f"{source}: ok (n = {scenario.n}, {scenario.grid_points} steps on [0, {scenario.t_f:g}])")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="epicon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def source_args(p, many=False):
        p.add_argument("--preset", action="append" if many else None, metavar="NAME",
                       help="named scenario (see 'epicon presets')" + ("; repeatable" if many else ""))
        p.add_argument("--scenario", metavar="PATH", help="scenario JSON file")
        p.add_argument("--grid", type=int, metavar="N", help="number of grid intervals")
        p.add_argument("--out", metavar="DIR", help=f"output directory (default $EPICON_OUT or {DEFAULT_OUT})")

    p = sub.add_parser("simulate", help="forward simulation under a given control")
    source_args(p)
    p.add_argument("--control", metavar="SPEC", help="'zero' (default), 'max', a constant, or a control CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve", help="compute the optimal control")
    source_args(p, many=True)
    p.add_argument("--method", choices=("fbsm", "pg"), help="default: fbsm for superlinear costs, else pg")
    p.add_argument("--tol", type=float, metavar="X", help="relative stopping tolerance (default 1e-6)")
    p.add_argument("--jobs", type=int, default=1, metavar="K", help="solve several presets in parallel")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("analyze", help="re-run structure analysis on a saved solve")
    p.add_argument("--out", metavar="DIR", help="directory holding report.json and control.csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("presets", help="list named scenarios")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("validate", help="check a scenario file or preset")
    source_args(p)
    p.set_defaults(func=cmd_validate)
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "preset", None) and isinstance(args.preset, str):
        args.preset = [args.preset]
    try:
        return args.func(args)
    except ValidationError as exc:
        print("invalid scenario:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INVALID
    except (ParseError, _InputError, EpiconError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
