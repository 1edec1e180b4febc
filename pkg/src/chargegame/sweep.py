"""Coalition-size sweeps with monotonicity and concavity audits.

Sweeps re-solve the same game over a grid of coalition sizes M, recording
the peak-alternative weights and the entity costs at each equilibrium and
auditing how they vary: the coalition's peak weight should not decrease
with M, the individuals' should not increase, and all entity costs should
not increase.  Concavity of the coalition's peak weight is audited per
regime branch, because the closed form is allowed to kink convexly where a
regime boundary is crossed.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import DEFAULT_GAP_TOL, DEFAULT_MAX_ITER, StepSize, default_step_schedule, solve_dynamics
from .errors import ChargeGameError, SpecError
from .model import GameSpec, _window_sum
from .threeslot import (
    ThreeSlotInstance,
    ce_costs,
    equilibrium_profile,
    instance_from_spec,
    solve_ce,
    with_coalition_size,
)
from .verify import SolverStatus, make_report

DEFAULT_GRID_SIZE = 101
DEFAULT_GRID_START = 0.01
DEFAULT_AUDIT_TOL = 1e-9


def default_grid(
    count: int = DEFAULT_GRID_SIZE,
    start: float = DEFAULT_GRID_START,
    stop: float = 1.0,
) -> np.ndarray:
    """Uniform grid of coalition sizes; M = 0 is approached, never hit."""
    return np.linspace(start, stop, count)


@dataclass(frozen=True)
class SweepPoint:
    """One grid record: equilibrium weights and costs at coalition size m.

    ``x1`` and ``x0`` are the coalition's and the individuals' weight on
    the peak (a-priori most expensive) start slot.  Costs are reduced for
    three-slot games.  Solver failures land in ``error`` with NaN values
    instead of aborting the sweep.
    """

    m: float
    x1: float
    x0: float
    cost_individuals: float
    cost_coalition: float
    cost_social: float
    regime: str | None
    gap: float
    status: str
    error: str | None = None


@dataclass(frozen=True)
class AuditVerdict:
    """Result of one monotonicity/concavity audit.

    ``worst_value`` is the most adverse difference observed (negative or
    tiny means clean); ``worst_pair`` gives the grid indices it came from.
    """

    passed: bool
    worst_value: float
    worst_pair: tuple[int, int] | None = None
    note: str = ""


@dataclass(frozen=True)
class SweepResult:
    grid: np.ndarray
    points: tuple[SweepPoint, ...]
    audits: dict[str, AuditVerdict]
    reduced: bool


def peak_start_slot(spec: GameSpec) -> int:
    """Start slot with the largest non-EV load over its charging window."""
    return int(np.argmax(_window_sum(spec.base_load, spec.duration)))


def audit_monotone(values, direction: str, tol: float = DEFAULT_AUDIT_TOL) -> AuditVerdict:
    """Check adjacent differences against a direction within tol."""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return AuditVerdict(passed=True, worst_value=0.0)
    diffs = np.diff(values)
    if direction == "nondecreasing":
        adverse = -diffs
    elif direction == "nonincreasing":
        adverse = diffs
    else:
        raise SpecError(f"unknown direction {direction!r}")
    worst = int(np.argmax(adverse))
    worst_value = float(adverse[worst])
    return AuditVerdict(
        passed=worst_value <= tol,
        worst_value=worst_value,
        worst_pair=(worst, worst + 1),
    )


def audit_concave(values, tol: float = DEFAULT_AUDIT_TOL) -> AuditVerdict:
    """Check second differences on a uniform grid stay below tol."""
    values = np.asarray(values, dtype=float)
    if len(values) < 3:
        return AuditVerdict(passed=True, worst_value=0.0)
    second = values[2:] - 2.0 * values[1:-1] + values[:-2]
    worst = int(np.argmax(second))
    worst_value = float(second[worst])
    return AuditVerdict(
        passed=worst_value <= tol,
        worst_value=worst_value,
        worst_pair=(worst, worst + 2),
    )


def audit_concave_branches(
    values, tags, tol: float = DEFAULT_AUDIT_TOL
) -> AuditVerdict:
    """Concavity audit applied separately to each run of equal regime tags.

    The closed-form peak weight can kink convexly exactly where the regime
    changes, so the concavity claim is checked per branch.
    """
    values = np.asarray(values, dtype=float)
    tags = list(tags)
    if len(values) != len(tags):
        raise SpecError("values and tags must align")
    worst_value = -math.inf
    worst_pair = None
    start = 0
    for i in range(1, len(tags) + 1):
        if i < len(tags) and tags[i] == tags[start]:
            continue
        branch = audit_concave(values[start:i], tol)
        if branch.worst_value > worst_value:
            worst_value = branch.worst_value
            if branch.worst_pair is not None:
                worst_pair = (start + branch.worst_pair[0], start + branch.worst_pair[1])
        start = i
    if worst_pair is None:
        return AuditVerdict(passed=True, worst_value=0.0, note="per-branch")
    return AuditVerdict(
        passed=worst_value <= tol,
        worst_value=worst_value,
        worst_pair=worst_pair,
        note="per-branch",
    )


def run_sweep(
    base: ThreeSlotInstance | GameSpec,
    grid=None,
    solver: str = "analytic",
    *,
    audit_tol: float = DEFAULT_AUDIT_TOL,
    jobs: int = 1,
    max_iter: int = DEFAULT_MAX_ITER,
    gap_tol: float = DEFAULT_GAP_TOL,
    step_size: StepSize = default_step_schedule,
) -> SweepResult:
    """Solve the equilibrium at every grid coalition size and audit it.

    ``base`` fixes the loads, duration and cost family; the weights become
    (1 - m, m) at each grid point.  ``solver`` is "analytic" (closed form,
    three-slot instances only) or "dynamics".  Grid points are independent;
    ``jobs`` > 1 evaluates them in a process pool, with results always
    ordered by m.
    """
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise SpecError("sweep grid must be a nonempty vector")
    if grid.min() <= 0.0 or grid.max() > 1.0:
        raise SpecError("sweep grid values must lie in (0, 1]")
    if grid.size > 1 and np.diff(grid).min() <= 0:
        raise SpecError("sweep grid must be strictly increasing")

    if solver not in ("analytic", "dynamics"):
        raise SpecError(f"unknown solver {solver!r}")
    if solver == "analytic" and isinstance(base, GameSpec):
        base = instance_from_spec(base, coalition_size=float(grid[0]))
    if isinstance(base, GameSpec) and base.num_coalitions != 1:
        raise SpecError("sweeps require a game shape with exactly one coalition")

    options = {"max_iter": max_iter, "gap_tol": gap_tol, "step_size": step_size}
    args = [(base, float(m), solver, options) for m in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_solve_point, args))
    else:
        points = [_solve_point(a) for a in args]

    reduced = isinstance(base, ThreeSlotInstance) or (
        base.horizon == 3 and base.duration == 2 and abs(base.power - 1.0) <= 1e-12
    )
    audits = _run_audits(points, solver, audit_tol)
    return SweepResult(
        grid=grid, points=tuple(points), audits=audits, reduced=reduced
    )


def _solve_point(task) -> SweepPoint:
    base, m, solver, options = task
    try:
        if solver == "analytic":
            inst = with_coalition_size(base, m)
            point = solve_ce(inst)
            costs = ce_costs(inst, point)
            report = make_report(
                inst.to_game_spec(), equilibrium_profile(inst, point), SolverStatus.ANALYTIC
            )
            return SweepPoint(
                m=m,
                x1=point.coalition_on_peak,
                x0=point.individuals_on_peak,
                cost_individuals=costs.individuals,
                cost_coalition=costs.coalition,
                cost_social=costs.social,
                regime=point.regime.value,
                gap=report.vi_gap,
                status=SolverStatus.ANALYTIC.value,
            )
        spec = _spec_at(base, m)
        report = solve_dynamics(spec, **options)
        costs = report.reduced if report.reduced is not None else report.costs
        peak = peak_start_slot(spec)
        return SweepPoint(
            m=m,
            x1=float(report.profile.flows[1].values[peak]),
            x0=float(report.profile.flows[0].values[peak]),
            cost_individuals=costs.individuals,
            cost_coalition=costs.coalitions[0],
            cost_social=costs.social,
            regime=None,
            gap=report.vi_gap,
            status=report.status.value,
        )
    except ChargeGameError as exc:
        nan = float("nan")
        return SweepPoint(
            m=m,
            x1=nan,
            x0=nan,
            cost_individuals=nan,
            cost_coalition=nan,
            cost_social=nan,
            regime=None,
            gap=nan,
            status="error",
            error=str(exc),
        )


def _spec_at(base, m: float) -> GameSpec:
    if isinstance(base, ThreeSlotInstance):
        return with_coalition_size(base, m).to_game_spec()
    return GameSpec(
        horizon=base.horizon,
        duration=base.duration,
        power=base.power,
        base_load=base.base_load,
        cost=base.cost,
        weights=np.array([1.0 - m, m]),
    )


def _run_audits(points, solver: str, tol: float) -> dict[str, AuditVerdict]:
    clean = [p for p in points if p.error is None]
    if len(clean) != len(points):
        note = f"{len(points) - len(clean)} grid points failed; audits skipped"
        return {"solver_failures": AuditVerdict(False, math.inf, note=note)}
    audits = {
        "x1_nondecreasing": audit_monotone([p.x1 for p in clean], "nondecreasing", tol),
        "x0_nonincreasing": audit_monotone([p.x0 for p in clean], "nonincreasing", tol),
        "cost_individuals_nonincreasing": audit_monotone(
            [p.cost_individuals for p in clean], "nonincreasing", tol
        ),
        "cost_coalition_nonincreasing": audit_monotone(
            [p.cost_coalition for p in clean], "nonincreasing", tol
        ),
        "cost_social_nonincreasing": audit_monotone(
            [p.cost_social for p in clean], "nonincreasing", tol
        ),
    }
    if solver == "analytic":
        audits["x1_concave_per_branch"] = audit_concave_branches(
            [p.x1 for p in clean], [p.regime for p in clean], tol
        )
    return audits


def sweep_rows(result: SweepResult) -> list[dict]:
    """Flat row dicts for CSV emission, with costs normalized by the
    social cost at the smallest grid coalition size."""
    base_social = next(
        (p.cost_social for p in result.points if p.error is None), float("nan")
    )
    rows = []
    for p in result.points:
        scale = base_social if base_social and not math.isnan(base_social) else float("nan")
        rows.append(
            {
                "m": p.m,
                "x1": p.x1,
                "x0": p.x0,
                "cost_individuals": p.cost_individuals,
                "cost_coalition": p.cost_coalition,
                "cost_social": p.cost_social,
                "norm_cost_individuals": p.cost_individuals / scale,
                "norm_cost_coalition": p.cost_coalition / scale,
                "norm_cost_social": p.cost_social / scale,
                "regime": p.regime or "",
                "status": p.status if p.error is None else f"error: {p.error}",
            }
        )
    return rows


def write_csv(result: SweepResult, path) -> None:
    rows = sweep_rows(result)
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    key: f"{value:.12g}" if isinstance(value, float) else value
                    for key, value in row.items()
                }
            )


def audits_to_dict(result: SweepResult) -> dict:
    return {
        name: {
            "passed": verdict.passed,
            "worst_value": verdict.worst_value,
            "worst_pair": list(verdict.worst_pair) if verdict.worst_pair else None,
            "note": verdict.note,
        }
        for name, verdict in result.audits.items()
    }
