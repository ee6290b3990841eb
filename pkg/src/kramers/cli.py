"""Command-line front end.

Subcommands
-----------
simulate        one coupled trajectory pair, dumped as CSV
converge        exceedance-probability table across a mass ladder
exit-times      exit-probability table across a mass ladder
lyapunov-check  non-explosivity evidence (p1/p2) for a model's candidate
drift-check     pipeline noise-induced drift vs the analytic closed form

Every run writes its outputs atomically, embeds the fully resolved
configuration and master seed in the output header, and renders a
matplotlib figure next to the delimited output.  Exit codes: 0 success,
1 configuration error, 2 numerical failure above the quarantine
threshold.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import report
from .errors import KramersError, ParameterDomain, QuarantineExceeded
from .integrators import simulate_coupled
from .lyapunov import noise_induced_drift
from .models import Model, build_model, model_to_spec
from .montecarlo import (
    ExperimentPlan,
    exceedance_table,
    exit_table,
    run_experiment,
)
from .stability import non_explosivity_report

DRIFT_CHECK_TOL = 1e-6


def default_initial_position(model: Model):
    domain = model.domain
    if domain.kind == "interval":
        return np.array([0.5 * (domain.a + domain.b)])
    if domain.kind == "half_plane_order":
        return np.array([-0.5, 0.5])
    if domain.kind == "disk":
        return np.array([domain.radius / 3.0, 0.0])
    return np.ones(model.dim_n)


def _parse_floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_param(text):
    if "=" not in text:
        raise ParameterDomain(f"--param expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _resolve_model(args):
    params = {}
    name = None
    if getattr(args, "model_json", None):
        with open(args.model_json) as handle:
            spec = json.load(handle)
        name = spec["model"]
        params.update(spec.get("params", {}))
    if getattr(args, "model", None):
        name = args.model
    if name is None:
        raise ParameterDomain("no model given; use --model or --model-json")
    for item in getattr(args, "param", None) or []:
        key, value = _parse_param(item)
        params[key] = value
    return build_model(name, **params)


def _header_comments(command, config):
    return (
        f"kramers {command}",
        f"config = {json.dumps(config, sort_keys=True)}",
        f"master_seed = {config.get('master_seed', config.get('seed'))}",
    )


def _add_model_options(parser):
    parser.add_argument("--model", help="built-in model name")
    parser.add_argument("--model-json", help="path to a {model, params} JSON document")
    parser.add_argument(
        "--param", action="append", metavar="KEY=VALUE",
        help="override a model parameter (repeatable)",
    )


def _add_common_options(parser, default_out):
    parser.add_argument("--out", default=default_out, help="primary output path")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument(
        "--threads", type=int, default=0,
        help="worker threads (0 = auto, or KRAMERS_THREADS)",
    )
    parser.add_argument("--no-figure", action="store_true", help="skip figure rendering")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kramers",
        description="Coupled inertial/overdamped Langevin simulation and "
        "small-mass convergence experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one coupled trajectory pair")
    _add_model_options(p)
    _add_common_options(p, "trajectory.csv")
    p.add_argument("--x0", type=_parse_floats, default=None)
    p.add_argument("--v0", type=_parse_floats, default=None)
    p.add_argument("--m", type=float, default=1e-2, help="particle mass")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--path-index", type=int, default=0)

    for name, help_text in (
        ("converge", "exceedance probabilities across a mass ladder"),
        ("exit-times", "exit probabilities across a mass ladder"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_model_options(p)
        _add_common_options(p, name.replace("-", "_") + ".csv")
        p.add_argument("--x0", type=_parse_floats, default=None)
        p.add_argument("--v0", type=_parse_floats, default=None)
        p.add_argument("--T", type=float, default=1.0)
        p.add_argument("--dt", type=float, default=1e-5)
        p.add_argument(
            "--masses", type=_parse_floats, default=(1e-1, 1e-2, 1e-3, 1e-4),
            help="comma-separated strictly decreasing masses",
        )
        p.add_argument(
            "--eps", type=_parse_floats, default=(0.05,),
            help="comma-separated exceedance thresholds",
        )
        p.add_argument("--paths", type=int, default=400)

    p = sub.add_parser("lyapunov-check", help="p1/p2 non-explosivity evidence")
    _add_model_options(p)
    _add_common_options(p, "lyapunov_check.json")

    p = sub.add_parser("drift-check", help="pipeline drift vs analytic closed form")
    _add_model_options(p)
    _add_common_options(p, "drift_check.csv")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--tol", type=float, default=DRIFT_CHECK_TOL)

    return parser


# ---------------------------------------------------------------------------
# Command implementations


def _cmd_simulate(args):
    model = _resolve_model(args)
    x0 = np.asarray(args.x0 if args.x0 else default_initial_position(model))
    v0 = np.asarray(args.v0) if args.v0 else None
    config = {
        "command": "simulate", **model_to_spec(model),
        "x0": list(map(float, x0)), "v0": None if v0 is None else list(map(float, v0)),
        "m": args.m, "T": args.T, "dt": args.dt,
        "master_seed": args.seed, "path_index": args.path_index,
    }
    pair = simulate_coupled(
        model, x0, v0, args.m, args.T, args.dt, args.seed, args.path_index
    )
    comments = _header_comments("simulate", config)
    body = pair.to_csv()
    report.write_text(args.out, "".join(f"# {c}\n" for c in comments) + body)
    if not args.no_figure:
        report.trajectory_figure(pair, report.with_suffix(args.out, ".png"))
    sup = "inf" if np.isinf(pair.sup_distance) else f"{pair.sup_distance:.6g}"
    print(
        f"simulate: trajectory {args.out} sup_distance={sup} "
        f"exit_m={pair.exit_time_m} exit_limit={pair.exit_time_limit}"
    )
    return 0


def _make_plan(args, model):
    x0 = np.asarray(args.x0 if args.x0 else default_initial_position(model))
    v0 = np.asarray(args.v0) if args.v0 else None
    plan = ExperimentPlan(
        model=model, x0=x0, T=args.T, dt=args.dt, epsilons=args.eps,
        masses=args.masses, n_paths=args.paths, master_seed=args.seed, v0=v0,
    )
    config = {
        "command": args.command, **model_to_spec(model),
        "x0": list(map(float, plan.x0)),
        "v0": None if plan.v0 is None else list(map(float, plan.v0)),
        "T": plan.T, "dt": plan.dt, "masses": list(plan.masses),
        "epsilon": list(plan.epsilons), "n_paths": plan.n_paths,
        "master_seed": plan.master_seed,
    }
    return plan, config


def _cmd_ladder(args):
    model = _resolve_model(args)
    plan, config = _make_plan(args, model)
    results = run_experiment(plan, threads=args.threads)
    comments = _header_comments(args.command, config)
    if args.command == "converge":
        table = exceedance_table(results)
        fig = report.convergence_figure
    else:
        table = exit_table(results)
        fig = report.exit_figure
    csv_path = args.out if args.format == "csv" else report.with_suffix(args.out, ".csv")
    json_path = args.out if args.format == "json" else report.with_suffix(args.out, ".json")
    report.write_text(csv_path, table.to_csv(comments=comments))
    report.write_json(json_path, {"config": config, **table.to_json_dict()})
    report.write_text(report.with_suffix(args.out, ".dat"), table.to_gnuplot())
    if not args.no_figure:
        fig(table, report.with_suffix(args.out, ".png"))
    aborted = int(sum(res.aborted.sum() for res in results.per_mass))
    print(f"{args.command}: table {csv_path} ({len(table.rows)} rows, {aborted} aborted paths)")
    return 0


def _cmd_lyapunov_check(args):
    model = _resolve_model(args)
    config = {"command": "lyapunov-check", **model_to_spec(model), "master_seed": args.seed}
    result = non_explosivity_report(model)
    report.write_json(args.out, {"config": config, **result})
    if not args.no_figure:
        report.shells_figure(result, report.with_suffix(args.out, ".png"))
    verdict = "PASS" if result["pass"] else "FAIL"
    print(
        f"lyapunov-check: {verdict} model={model.name} "
        f"(p1={result['p1_pass']}, p2={result['p2_pass']}, report {args.out})"
    )
    return 0


def _cmd_drift_check(args):
    model = _resolve_model(args)
    if model.analytic_noise_drift is None:
        raise ParameterDomain(f"model {model.name!r} has no analytic drift to check against")
    config = {
        "command": "drift-check", **model_to_spec(model),
        "points": args.points, "tol": args.tol, "master_seed": args.seed,
    }
    grid = model.domain.interior_grid(count=args.points, margin=1e-2)
    pipeline = np.array([noise_induced_drift(model, x) for x in grid])
    analytic = np.asarray(model.analytic_noise_drift(grid), dtype=float)
    err = float(np.max(np.abs(pipeline - analytic)))
    comments = _header_comments("drift-check", config)
    lines = [f"# {c}" for c in comments]
    n = model.dim_n
    lines.append(
        ",".join([f"x_{i+1}" for i in range(n)]
                 + [f"S_pipeline_{i+1}" for i in range(n)]
                 + [f"S_analytic_{i+1}" for i in range(n)])
    )
    for x, sp, sa in zip(grid, pipeline, analytic):
        lines.append(",".join(repr(float(v)) for v in (*x, *sp, *sa)))
    report.write_text(args.out, "\n".join(lines) + "\n")
    if not args.no_figure:
        report.drift_check_figure(grid, pipeline, analytic, report.with_suffix(args.out, ".png"))
    verdict = "PASS" if err <= args.tol else "FAIL"
    print(f"drift-check: {verdict} model={model.name} max_abs_error={err:.3e} (tol {args.tol:g})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "converge": _cmd_ladder,
        "exit-times": _cmd_ladder,
        "lyapunov-check": _cmd_lyapunov_check,
        "drift-check": _cmd_drift_check,
    }
    try:
        return handlers[args.command](args)
    except QuarantineExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KramersError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
