"""Command-line interface.

Subcommands: generate, export-network, simulate, baseline, build-qubo,
solve, control, metrics, batch.  Diagnostics go to stderr; data goes to
files or stdout.  Exit codes: 0 success, 1 validation error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import dataio
from .controller import (
    ScenarioConfig,
    compute_metrics,
    run_rolling_horizon,
    run_uncontrolled_baseline,
)
from .epinet import (
    EpidemicParams,
    ModelKind,
    PowerIterationError,
    infection_rate_from_r0,
    simulate,
    validate_network,
)
from .qubo import (
    QuboParseError,
    build_qubo,
    export_qubo,
    import_qubo,
)
from .solvers import SolverConfig, solve

__all__ = ["cli_dispatch", "main"]

logger = logging.getLogger(__name__)


def _add_network_args(parser: argparse.ArgumentParser, cases: bool = True) -> None:
    parser.add_argument("--network", required=True, help="edges CSV path")
    parser.add_argument("--population", required=True, help="population CSV path")
    if cases:
        parser.add_argument("--cases", default=None, help="initial cases CSV path")


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", required=True, choices=["sis", "sir"])
    rate = parser.add_mutually_exclusive_group(required=True)
    rate.add_argument("--lambda", dest="lam", type=float, help="infection rate per step")
    rate.add_argument("--r0", type=float, help="reproduction number (calibrates the rate)")
    parser.add_argument("--mu", type=float, required=True, help="recovery rate per step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epiqubo",
        description="Mobility-ban control of network epidemics via quadratic binary optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit a synthetic network as CSV files")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--profile", choices=list(dataio.PROFILES), default="gravity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("export-network", help="reload a network and re-emit canonical CSVs")
    _add_network_args(p, cases=False)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_export_network)

    for name, default_steps in (("simulate", None), ("baseline", 30)):
        p = sub.add_parser(name, help="run the uncontrolled dynamics")
        _add_network_args(p)
        _add_model_args(p)
        p.add_argument(
            "--steps", type=int, required=default_steps is None, default=default_steps
        )
        p.add_argument("--out", default=None, help="trajectory CSV (stdout if omitted)")
        p.add_argument("--force", action="store_true", help="clamp states instead of refusing")
        p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("build-qubo", help="compile the two-step objective to a QUBO file")
    _add_network_args(p)
    _add_model_args(p)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--builder", choices=["analytic", "numeric"], default="analytic")
    p.add_argument("--out", default=None, help="QUBO text file (stdout if omitted)")
    p.set_defaults(func=_cmd_build_qubo)

    p = sub.add_parser("solve", help="minimize a QUBO file")
    p.add_argument("qubo_file", help="QUBO text file")
    p.add_argument("--solver", choices=["exhaustive", "sa", "tabu", "ga"], default="exhaustive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=None, help="max objective evaluations")
    p.add_argument("--out", default=None, help="result JSON (stdout if omitted)")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("control", help="run the rolling-horizon controller")
    _add_network_args(p)
    _add_model_args(p)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--solver", choices=["exhaustive", "sa", "tabu", "ga"], default="exhaustive")
    p.add_argument("--builder", choices=["analytic", "numeric"], default="analytic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=None, help="max objective evaluations per step")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="clamp states instead of refusing")
    p.set_defaults(func=_cmd_control)

    p = sub.add_parser("metrics", help="compare two trajectory CSVs")
    p.add_argument("--controlled", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--out", default=None, help="metrics JSON (stdout if omitted)")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("batch", help="run scenario files, one output directory each")
    p.add_argument("scenarios", nargs="+", help="scenario document paths")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=4)
    p.set_defaults(func=_cmd_batch)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_inputs(args) -> tuple:
    files = dataio.NetworkFiles(args.network, args.population, getattr(args, "cases", None))
    net, names, infected, removed = dataio.load_network(files)
    report = validate_network(net)
    for warning in report.warnings:
        logger.warning("network: %s", warning)
    if not report.ok:
        raise ValueError("invalid network: " + "; ".join(report.violations))
    kind = ModelKind(args.model)
    state0 = dataio.initial_state(kind, net.m, infected, removed)
    if args.lam is not None:
        lam = args.lam
    else:
        lam = infection_rate_from_r0(args.r0, args.mu, net)
    return net, names, kind, lam, state0


def _cmd_generate(args) -> int:
    net = dataio.generate_synthetic(args.m, args.profile, args.seed)
    edges, pops = dataio.write_network_csvs(net, args.out)
    print(f"wrote {edges} and {pops}", file=sys.stderr)
    return 0


def _cmd_export_network(args) -> int:
    files = dataio.NetworkFiles(args.network, args.population)
    net, names, _, _ = dataio.load_network(files)
    edges, pops = dataio.write_network_csvs(net, args.out, names)
    print(f"wrote {edges} and {pops}", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    net, _, kind, lam, state0 = _load_inputs(args)
    cfg = ScenarioConfig(
        network=net,
        kind=kind,
        lam=lam,
        mu=args.mu,
        gamma=0.0,
        steps=max(args.steps, 1),
        force=args.force,
    )
    if args.steps < 0:
        raise ValueError("steps must be nonnegative")
    if args.steps == 0:
        traj = simulate(net, cfg.params, state0, None, 0)
    else:
        traj = run_uncontrolled_baseline(cfg, state0)
    _emit(dataio.trajectory_csv_text(traj), args.out)
    return 0


def _cmd_build_qubo(args) -> int:
    net, _, kind, lam, state0 = _load_inputs(args)
    params = EpidemicParams(kind, lam, args.mu)
    q = build_qubo(net, params, state0, args.gamma, args.builder)
    _emit(export_qubo(q), args.out)
    return 0


def _cmd_solve(args) -> int:
    text = Path(args.qubo_file).read_text(encoding="utf-8")
    q = import_qubo(text)
    cfg = SolverConfig(seed=args.seed)
    if args.budget is not None:
        cfg = SolverConfig(seed=args.seed, budget=args.budget)
    result = solve(q, args.solver, cfg)
    payload = {
        "solver": args.solver,
        "seed": args.seed,
        "z_best": result.z_best.astype(int).tolist(),
        "control": (1 - result.z_best).astype(int).tolist(),
        "objective": result.objective,
        "evaluations": result.evaluations,
        "wall_time_seconds": result.wall_time,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def _scenario_echo(args, lam: float) -> dict:
    # every value is a string so the echo is identical whether the run came
    # from flags or from a parsed scenario document
    echo = {
        "model": args.model,
        "lambda": repr(float(lam)),
        "mu": repr(float(args.mu)),
        "gamma": repr(float(args.gamma)),
        "steps": str(args.steps),
        "solver": args.solver,
        "builder": args.builder,
        "seed": str(args.seed),
        "force": "true" if args.force else "false",
        "edges": str(Path(args.network).resolve()),
        "population": str(Path(args.population).resolve()),
    }
    if args.cases:
        echo["cases"] = str(Path(args.cases).resolve())
    if args.budget is not None:
        echo["budget"] = str(args.budget)
    return echo


def _run_control(cfg: ScenarioConfig, state0, echo: dict, out_dir: str) -> dict:
    log = run_rolling_horizon(cfg, state0)
    baseline = run_uncontrolled_baseline(cfg, state0)
    metrics = compute_metrics(log, baseline)
    report = dataio.build_run_report(echo, metrics, log, baseline)
    dataio.write_run_report(out_dir, report, log, baseline)
    return report


def _cmd_control(args) -> int:
    net, _, kind, lam, state0 = _load_inputs(args)
    solver_cfg = SolverConfig() if args.budget is None else SolverConfig(budget=args.budget)
    cfg = ScenarioConfig(
        network=net,
        kind=kind,
        lam=lam,
        mu=args.mu,
        gamma=args.gamma,
        steps=args.steps,
        solver=args.solver,
        solver_config=solver_cfg,
        builder=args.builder,
        seed=args.seed,
        force=args.force,
    )
    report = _run_control(cfg, state0, _scenario_echo(args, lam), args.out)
    m = report["metrics"]
    print(
        f"peak reduction: {m['peak_reduction_pct']}%  "
        f"average reduction: {m['avg_reduction_pct']}%",
        file=sys.stderr,
    )
    return 0


def _cmd_metrics(args) -> int:
    totals_c = dataio.read_trajectory_totals(args.controlled)
    totals_u = dataio.read_trajectory_totals(args.baseline)
    if totals_c.shape != totals_u.shape:
        raise ValueError("controlled and baseline trajectories must cover the same window")
    peak_c, peak_u = float(totals_c.max()), float(totals_u.max())
    avg_c = float(totals_c[1:].mean()) if len(totals_c) > 1 else 0.0
    avg_u = float(totals_u[1:].mean()) if len(totals_u) > 1 else 0.0
    payload = {
        "peak_uncontrolled": peak_u,
        "peak_controlled": peak_c,
        "avg_uncontrolled": avg_u,
        "avg_controlled": avg_c,
        "peak_reduction_pct": None if peak_u == 0.0 else 100.0 * (peak_u - peak_c) / peak_u,
        "avg_reduction_pct": None if avg_u == 0.0 else 100.0 * (avg_u - avg_c) / avg_u,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def _scenario_from_document(path: Path) -> tuple[ScenarioConfig, object, dict]:
    values = dataio.parse_scenario_text(path.read_text(encoding="utf-8"))
    base = path.parent

    def _resolve_path(key: str) -> str | None:
        if key not in values:
            return None
        candidate = Path(values[key])
        return str(candidate if candidate.is_absolute() else (base / candidate).resolve())

    if "profile" in values:
        net = dataio.generate_synthetic(
            int(values["m"]), values["profile"], int(values.get("network_seed", "0"))
        )
        names = None
        infected = np.zeros(net.m)
        removed = None
        cases_path = _resolve_path("cases")
        if cases_path is not None:
            # cases in synthetic scenarios reference integer indices directly
            resolver = {str(i): i for i in range(net.m)}
            infected, removed = dataio._load_cases(cases_path, resolver, net.populations)
    else:
        files = dataio.NetworkFiles(
            _resolve_path("edges"), _resolve_path("population"), _resolve_path("cases")
        )
        net, names, infected, removed = dataio.load_network(files)
    report = validate_network(net)
    if not report.ok:
        raise ValueError("invalid network: " + "; ".join(report.violations))

    kind = ModelKind(values["model"])
    mu = float(values["mu"])
    if "lambda" in values:
        lam = float(values["lambda"])
    else:
        lam = infection_rate_from_r0(float(values["r0"]), mu, net)
    state0 = dataio.initial_state(kind, net.m, infected, removed)

    solver_kwargs = {}
    for field in dataclass_fields(SolverConfig):
        if field.name == "seed" or field.name not in values:
            continue
        raw = values[field.name]
        solver_kwargs[field.name] = (
            int(raw) if field.type in ("int", "int | None") else float(raw)
        )
    cfg = ScenarioConfig(
        network=net,
        kind=kind,
        lam=lam,
        mu=mu,
        gamma=float(values["gamma"]),
        steps=int(values.get("steps", "30")),
        solver=values.get("solver", "exhaustive"),
        solver_config=SolverConfig(**solver_kwargs),
        builder=values.get("builder", "analytic"),
        seed=int(values.get("seed", "0")),
        force=values.get("force", "false").lower() == "true",
    )
    echo = dict(values)
    echo.pop("r0", None)
    echo["lambda"] = repr(lam)
    for key in ("edges", "population", "cases"):
        resolved = _resolve_path(key)
        if resolved is not None:
            echo[key] = resolved
    return cfg, state0, echo


def _cmd_batch(args) -> int:
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)

    def run_one(scenario_path: str) -> None:
        path = Path(scenario_path)
        cfg, state0, echo = _scenario_from_document(path)
        _run_control(cfg, state0, echo, str(out_root / path.stem))

    worst = 0
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = {pool.submit(run_one, s): s for s in args.scenarios}
        for future in concurrent.futures.as_completed(futures):
            name = futures[future]
            try:
                future.result()
            except (ValueError, OSError, QuboParseError) as exc:
                print(f"error in {name}: {exc}", file=sys.stderr)
                worst = max(worst, 1)
            except Exception as exc:
                print(f"runtime error in {name}: {exc}", file=sys.stderr)
                worst = max(worst, 2)
    return worst


def cli_dispatch(argv: list[str]) -> int:
    """Parse and run one command, mapping failures to exit codes."""
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, OSError, QuboParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PowerIterationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
