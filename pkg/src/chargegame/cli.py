"""Command-line interface: scenario ingestion, solving, result emission.

Scenarios are single JSON documents (see ``configs/`` in the repository for
examples).  Subcommands:

* ``solve``          one equilibrium -> report.json + loads.csv + equilibrium_loads.csv
* ``sweep``          coalition-size sweep -> sweep.csv + sweep_audits.json
* ``dynamics-trace`` learning run with per-iteration trace -> trace.csv + report.json
* ``verify``         re-check a saved report.json

All numeric output is deterministic for a given config; report numbers are
written at 12 significant digits, while the loads.csv echo keeps full float
precision so re-ingesting it reproduces the game bit-exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .costs import cost_from_config, cost_to_config
from .dynamics import default_step_schedule, solve_dynamics
from .errors import ChargeGameError, SpecError
from .model import GameSpec, Profile, supports_reduced_costs
from .sweep import audits_to_dict, run_sweep, write_csv
from .threeslot import equilibrium_profile, instance_from_spec, solve_ce
from .verify import (
    EquilibriumReport,
    SolverStatus,
    check_cost_ordering,
    check_wardrop,
    make_report,
    vi_gap,
)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_CONFIG_ERROR = 2

SOLVER_DEFAULTS = {
    "method": "auto",
    "max_iter": 100_000,
    "gap_tol": 1e-6,
    "step_size": "default",
    "trace_every": 1,
}

SWEEP_DEFAULTS = {"start": 0.01, "stop": 1.0, "count": 101}


def _sig12(value: float) -> float:
    if value is None or isinstance(value, bool):
        return value
    if math.isnan(value) or math.isinf(value):
        return value
    return float(f"{value:.12g}")


def _round_floats(obj):
    if isinstance(obj, float):
        return _sig12(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def load_profile_csv(path: str, normalize: bool = False) -> np.ndarray:
    """Read a ``t,load`` CSV with rows t = 1..T in order.

    ``normalize`` rescales so the maximum load equals one (the convention
    is recorded in the output metadata, not assumed by the reader).
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SpecError(f"{path}: empty load-profile CSV") from None
        if [h.strip().lower() for h in header] != ["t", "load"]:
            raise SpecError(f"{path}: expected header 't,load', got {header}")
        loads = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise SpecError(f"{path}:{lineno}: expected two columns")
            try:
                t = int(row[0])
                value = float(row[1])
            except ValueError:
                raise SpecError(
                    f"{path}:{lineno}: non-numeric entry {row!r}"
                ) from None
            expected = len(loads) + 1
            if t != expected:
                raise SpecError(
                    f"{path}:{lineno}: slot column must run 1..T in order; "
                    f"expected t={expected}, got t={t}"
                )
            loads.append(value)
    if not loads:
        raise SpecError(f"{path}: no load rows found")
    result = np.array(loads)
    if normalize:
        peak = result.max()
        if peak <= 0:
            raise SpecError(f"{path}: cannot normalize an all-zero profile")
        result = result / peak
    return result


def resolve_config(raw: dict, config_dir: str, normalize_flag: bool = False) -> dict:
    """Fill in every default and resolve the load profile to a vector."""
    if not isinstance(raw, dict):
        raise SpecError("config must be a JSON object")
    for key in ("game", "load_profile"):
        if key not in raw:
            raise SpecError(f"config is missing the '{key}' section")

    game = dict(raw["game"])
    for key in ("horizon", "duration", "weights"):
        if key not in game:
            raise SpecError(f"config game section is missing '{key}'")
    game.setdefault("power", 1.0)
    game.setdefault("cost", {"kind": "linear", "slope": 1.0, "intercept": 0.0})

    profile_cfg = raw["load_profile"]
    meta = {"normalized": False, "convention": "max load scaled to 1"}
    if isinstance(profile_cfg, dict):
        if "csv" not in profile_cfg:
            raise SpecError("load_profile mapping needs a 'csv' path")
        path = profile_cfg["csv"]
        if not os.path.isabs(path):
            path = os.path.join(config_dir, path)
        normalize = bool(profile_cfg.get("normalize", False)) or normalize_flag
        loads = load_profile_csv(path, normalize=normalize)
        meta.update({"source": profile_cfg["csv"], "normalized": normalize})
    else:
        loads = np.asarray(profile_cfg, dtype=float)
        if normalize_flag:
            peak = loads.max()
            if peak <= 0:
                raise SpecError("cannot normalize an all-zero load profile")
            loads = loads / peak
            meta["normalized"] = True
        meta["source"] = "inline"

    solver = dict(SOLVER_DEFAULTS)
    solver.update(raw.get("solver", {}))
    if solver["method"] not in ("auto", "analytic", "dynamics"):
        raise SpecError(f"unknown solver method {solver['method']!r}")

    sweep_cfg = raw.get("sweep")
    if sweep_cfg is not None and "grid" not in sweep_cfg:
        merged = dict(SWEEP_DEFAULTS)
        merged.update(sweep_cfg)
        sweep_cfg = merged

    return {
        "game": game,
        "load_profile": [float(x) for x in loads],
        "load_profile_meta": meta,
        "solver": solver,
        "sweep": sweep_cfg,
    }


def build_game(resolved: dict) -> GameSpec:
    game = resolved["game"]
    return GameSpec(
        horizon=int(game["horizon"]),
        duration=int(game["duration"]),
        power=float(game["power"]),
        base_load=np.array(resolved["load_profile"]),
        cost=cost_from_config(game["cost"]),
        weights=np.array(game["weights"], dtype=float),
    )


def _resolve_method(resolved: dict, spec: GameSpec) -> str:
    method = resolved["solver"]["method"]
    if method != "auto":
        return method
    analytic_capable = (
        spec.num_coalitions == 1
        and supports_reduced_costs(spec)
        and spec.base_load[0] >= spec.base_load[2]
    )
    return "analytic" if analytic_capable else "dynamics"


def _step_size(solver_cfg: dict):
    step = solver_cfg["step_size"]
    if step == "default":
        return default_step_schedule
    return float(step)


def _solve(resolved: dict, spec: GameSpec, trace_every: int = 0) -> EquilibriumReport:
    # Traces only exist for the iterative solver.
    method = "dynamics" if trace_every > 0 else _resolve_method(resolved, spec)
    if method == "analytic":
        inst = instance_from_spec(spec, coalition_size=float(spec.weights[1]))
        point = solve_ce(inst)
        return make_report(
            spec, equilibrium_profile(inst, point), SolverStatus.ANALYTIC
        )
    solver = resolved["solver"]
    return solve_dynamics(
        spec,
        max_iter=int(solver["max_iter"]),
        gap_tol=float(solver["gap_tol"]),
        step_size=_step_size(solver),
        trace_every=trace_every,
    )


def _summary_to_dict(summary) -> dict:
    return {
        "individuals": summary.individuals,
        "individuals_extended": summary.individuals_extended,
        "coalitions": list(summary.coalitions),
        "social": summary.social,
    }


def report_to_dict(report: EquilibriumReport, resolved: dict) -> dict:
    spec = report.game
    return _round_floats(
        {
            "game": {
                "horizon": spec.horizon,
                "duration": spec.duration,
                "power": spec.power,
                "base_load": [float(x) for x in spec.base_load],
                "cost": cost_to_config(spec.cost),
                "weights": [float(w) for w in spec.weights],
            },
            "load_profile_meta": resolved.get("load_profile_meta", {}),
            "status": report.status.value,
            "iterations": report.iterations,
            "vi_gap": report.vi_gap,
            "wardrop_slack": report.wardrop_slack,
            "boundary": report.boundary,
            "profile": [[float(x) for x in f.values] for f in report.profile.flows],
            "loads": {
                "per_player": [[float(x) for x in row] for row in report.loads.per_player],
                "aggregate": [float(x) for x in report.loads.aggregate],
            },
            "costs": _summary_to_dict(report.costs),
            "reduced_costs": None if report.reduced is None else _summary_to_dict(report.reduced),
        }
    )


def report_from_dict(data: dict) -> tuple[GameSpec, Profile, dict]:
    game = data["game"]
    spec = GameSpec(
        horizon=int(game["horizon"]),
        duration=int(game["duration"]),
        power=float(game["power"]),
        base_load=np.array(game["base_load"], dtype=float),
        cost=cost_from_config(game["cost"]),
        weights=np.array(game["weights"], dtype=float),
    )
    profile = Profile.from_rows(spec, np.array(data["profile"], dtype=float))
    return spec, profile, data


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_loads_echo(path: str, spec: GameSpec) -> None:
    # Full float precision: re-ingesting this file must reproduce the
    # game's load vector bit-exactly.
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "load"])
        for t, value in enumerate(spec.base_load, start=1):
            writer.writerow([t, repr(float(value))])


def _write_equilibrium_loads(path: str, report: EquilibriumReport) -> None:
    spec = report.game
    names = (
        ["individuals"]
        + (
            ["coalition"]
            if spec.num_coalitions == 1
            else [f"coalition_{k}" for k in range(1, spec.num_players)]
        )
    )
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "non_ev"] + names + ["total"])
        for t in range(spec.horizon):
            ev_parts = [
                spec.power * report.loads.per_player[i][t]
                for i in range(spec.num_players)
            ]
            total = spec.base_load[t] + sum(ev_parts)
            row = [t + 1, f"{spec.base_load[t]:.12g}"]
            row += [f"{part:.12g}" for part in ev_parts]
            row.append(f"{total:.12g}")
            writer.writerow(row)


def _write_trace(path: str, report: EquilibriumReport) -> None:
    if not report.trace:
        raise SpecError("report carries no trace to write")
    players, slots = report.trace[0].flows.shape
    header = ["iteration", "gap"] + [
        f"x{i}_{t + 1}" for i in range(players) for t in range(slots)
    ]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in report.trace:
            flat = [f"{x:.12g}" for x in row.flows.ravel()]
            writer.writerow([row.iteration, f"{row.gap:.12g}"] + flat)


def _load_config(args) -> dict:
    with open(args.config) as handle:
        raw = json.load(handle)
    config_dir = os.path.dirname(os.path.abspath(args.config))
    return resolve_config(raw, config_dir, normalize_flag=args.normalize)


def _cmd_solve(args, trace_every: int = 0) -> int:
    resolved = _load_config(args)
    spec = build_game(resolved)
    if args.print_config:
        print(json.dumps(_round_floats(resolved), indent=2, sort_keys=True))
        return EXIT_OK
    report = _solve(resolved, spec, trace_every=trace_every)
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "report.json"), report_to_dict(report, resolved))
    _write_loads_echo(os.path.join(args.out, "loads.csv"), spec)
    _write_equilibrium_loads(os.path.join(args.out, "equilibrium_loads.csv"), report)
    if trace_every > 0:
        _write_trace(os.path.join(args.out, "trace.csv"), report)
    ok = report.status in (SolverStatus.ANALYTIC, SolverStatus.CONVERGED)
    print(
        f"{report.status.value}: vi_gap={report.vi_gap:.3e} "
        f"iterations={report.iterations} -> {args.out}"
    )
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _cmd_sweep(args) -> int:
    resolved = _load_config(args)
    spec = build_game(resolved)
    if args.print_config:
        print(json.dumps(_round_floats(resolved), indent=2, sort_keys=True))
        return EXIT_OK
    sweep_cfg = resolved["sweep"] or dict(SWEEP_DEFAULTS)
    if "grid" in sweep_cfg:
        grid = np.array(sweep_cfg["grid"], dtype=float)
    else:
        grid = np.linspace(
            float(sweep_cfg["start"]), float(sweep_cfg["stop"]), int(sweep_cfg["count"])
        )
    method = _resolve_method(resolved, spec)
    solver_cfg = resolved["solver"]
    result = run_sweep(
        spec if method == "dynamics" else instance_from_spec(spec, float(grid[0])),
        grid,
        solver=method,
        jobs=args.jobs,
        max_iter=int(solver_cfg["max_iter"]),
        gap_tol=float(solver_cfg["gap_tol"]),
        step_size=_step_size(solver_cfg),
    )
    os.makedirs(args.out, exist_ok=True)
    write_csv(result, os.path.join(args.out, "sweep.csv"))
    _write_json(
        os.path.join(args.out, "sweep_audits.json"),
        _round_floats(
            {
                "solver": method,
                "audits": audits_to_dict(result),
                "load_profile_meta": resolved["load_profile_meta"],
            }
        ),
    )
    failures = [p for p in result.points if p.error is not None]
    print(
        f"sweep: {len(result.points)} points ({len(failures)} failed), "
        f"audits {'pass' if all(v.passed for v in result.audits.values()) else 'FAIL'} "
        f"-> {args.out}"
    )
    return EXIT_OK if not failures else EXIT_NOT_CONVERGED


def _cmd_verify(args) -> int:
    with open(args.report) as handle:
        data = json.load(handle)
    spec, profile, stored = report_from_dict(data)
    gap = vi_gap(spec, profile)
    wardrop = check_wardrop(spec, profile, eps=args.gap_tol)
    report = make_report(
        spec, profile, SolverStatus(stored["status"]), iterations=stored["iterations"]
    )
    ordering = check_cost_ordering(report, tol=max(args.gap_tol, 1e-9))
    stored_gap = float(stored["vi_gap"])
    drift = abs(gap - stored_gap)
    ok = gap <= args.gap_tol and wardrop.passed and ordering.passed
    print(f"recomputed vi_gap={gap:.3e} (stored {stored_gap:.3e}, drift {drift:.1e})")
    print(f"wardrop: {'pass' if wardrop.passed else f'FAIL {wardrop.witness}'}")
    print(
        "cost ordering: "
        + ("pass" if ordering.passed else "FAIL " + "; ".join(ordering.violations))
    )
    print("verdict:", "equilibrium certified" if ok else "NOT certified")
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chargegame",
        description="Composite-equilibrium solvers for EV charging games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="scenario JSON path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument(
            "--normalize",
            action="store_true",
            help="rescale the load profile so its maximum is 1",
        )
        p.add_argument(
            "--print-config",
            action="store_true",
            help="print the fully resolved config and exit",
        )

    solve = sub.add_parser("solve", help="compute one equilibrium")
    add_common(solve)

    sweep = sub.add_parser("sweep", help="sweep the coalition size")
    add_common(sweep)
    sweep.add_argument("--jobs", type=int, default=1, help="parallel grid workers")

    trace = sub.add_parser(
        "dynamics-trace", help="run the learning dynamics with a per-iteration trace"
    )
    add_common(trace)
    trace.add_argument(
        "--trace-every", type=int, default=1, help="record every N-th iteration"
    )

    verify = sub.add_parser("verify", help="re-check a saved report")
    verify.add_argument("--report", required=True, help="report.json path")
    verify.add_argument("--gap-tol", type=float, default=1e-5)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "dynamics-trace":
            return _cmd_solve(args, trace_every=max(1, args.trace_every))
        if args.command == "verify":
            return _cmd_verify(args)
        raise SpecError(f"unknown command {args.command!r}")
    except ChargeGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON in config: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
