"""Equilibrium certification.

A profile is a composite equilibrium exactly when the individuals satisfy
the Wardrop conditions (every strategy they use is a cheapest one) and
each coalition's flow minimizes its average cost given everyone else.
Both conditions collapse into a single scalar certificate here: the
variational gap, the total advantage all players could gain by linearized
unilateral moves.  It is nonnegative everywhere and zero exactly at
composite equilibria, so solvers use it as their stopping rule and reports
carry it as the certification value.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dynamics import TraceRow, _gap_rows, player_gradients
from .model import (
    CostSummary,
    GameSpec,
    LoadDecomposition,
    Profile,
    decompose_loads,
    evaluate_costs,
    reduced_costs,
    strategy_costs,
    supports_reduced_costs,
)

# Fraction of a player's mass below which a strategy counts as unused.
DEFAULT_SUPPORT_RATIO = 1e-6


class SolverStatus(enum.Enum):
    ANALYTIC = "analytic"
    CONVERGED = "converged"
    MAX_ITER_REACHED = "max-iter-reached"


def support_threshold(mass: float) -> float:
    return DEFAULT_SUPPORT_RATIO * mass


def vi_gap(
    spec: GameSpec,
    profile: Profile,
    *,
    gradients: np.ndarray | None = None,
) -> float:
    """Total linearized improvement available to all players at once.

    Per player this is the inner product of its marginal costs with its own
    flow, minus the mass times the smallest marginal cost: the best score a
    linearized unilateral deviation over the player's scaled simplex could
    reach.  Nonnegative always; zero exactly at composite equilibria.
    """
    if gradients is None:
        gradients = player_gradients(spec, profile)
    return _gap_rows(spec.weights, profile.matrix(), gradients)


@dataclass(frozen=True)
class WardropCheck:
    """Outcome of the individuals' equilibrium-condition check.

    ``worst_slack`` is the largest excess of a used strategy's cost over
    the cheapest one; ``witness`` names the offending (start, cost, best)
    triple when the check fails.
    """

    passed: bool
    worst_slack: float
    witness: tuple[int, float, float] | None = None


def check_wardrop(
    spec: GameSpec,
    profile: Profile,
    eps: float,
    *,
    support_tol: float | None = None,
) -> WardropCheck:
    """Pass iff every strategy the individuals use is within eps of cheapest."""
    costs = strategy_costs(spec, profile)
    mass = float(spec.weights[0])
    if support_tol is None:
        support_tol = support_threshold(mass)
    used = profile.flows[0].values > support_tol
    if not used.any():
        return WardropCheck(passed=True, worst_slack=0.0)
    best = float(costs.min())
    slack = costs - best
    slack[~used] = -np.inf
    worst = int(np.argmax(slack))
    worst_slack = float(slack[worst])
    if worst_slack <= eps:
        return WardropCheck(passed=True, worst_slack=worst_slack)
    return WardropCheck(
        passed=False,
        worst_slack=worst_slack,
        witness=(worst, float(costs[worst]), best),
    )


@dataclass(frozen=True)
class OptimalityCheck:
    """Outcome of one coalition's best-response check (its own gap term)."""

    passed: bool
    gap: float


def check_coalition_optimality(
    spec: GameSpec,
    profile: Profile,
    k: int,
    eps: float,
    *,
    gradients: np.ndarray | None = None,
) -> OptimalityCheck:
    """Pass iff coalition ``k``'s linearized improvement is at most eps."""
    if gradients is None:
        gradients = player_gradients(spec, profile)
    mass = float(spec.weights[k])
    row = gradients[k]
    gap = float(profile.flows[k].values @ row) - mass * float(row.min())
    gap = max(gap, 0.0)
    return OptimalityCheck(passed=gap <= eps, gap=gap)


@dataclass(frozen=True)
class OrderingCheck:
    """Outcome of the equilibrium cost-ordering check."""

    passed: bool
    violations: tuple[str, ...] = ()


@dataclass(frozen=True)
class EquilibriumReport:
    """A solved profile with its certification diagnostics.

    ``reduced`` carries the middle-slot-normalized costs for three-slot
    games and is None otherwise.  ``boundary`` flags profiles sitting on a
    simplex boundary (some strategy essentially unused), where an iterative
    limit point deserves a closer look before being read as an equilibrium.
    """

    game: GameSpec
    profile: Profile
    loads: LoadDecomposition
    costs: CostSummary
    reduced: CostSummary | None
    vi_gap: float
    wardrop_slack: float
    boundary: bool
    status: SolverStatus
    iterations: int
    trace: tuple[TraceRow, ...] | None = None


def check_cost_ordering(report: EquilibriumReport, tol: float = 1e-9) -> OrderingCheck:
    """At a certified equilibrium: individuals <= social <= each coalition.

    The ordering is an equilibrium property (individuals sit on the
    cheapest alternatives), not a general-profile one, so call this only
    on reports whose gap is within its certification tolerance.
    """
    costs = report.costs
    violations = []
    if costs.individuals > costs.social + tol:
        violations.append(
            f"individuals {costs.individuals} > social {costs.social}"
        )
    for k, value in enumerate(costs.coalitions, start=1):
        if value is not None and costs.social > value + tol:
            violations.append(f"social {costs.social} > coalition {k} {value}")
    return OrderingCheck(passed=not violations, violations=tuple(violations))


def make_report(
    spec: GameSpec,
    profile: Profile,
    status: SolverStatus,
    *,
    iterations: int = 0,
    gap: float | None = None,
    trace: tuple[TraceRow, ...] | None = None,
) -> EquilibriumReport:
    """Assemble the full diagnostic report for a solved profile."""
    loads = decompose_loads(spec, profile)
    gradients = player_gradients(spec, profile, loads=loads)
    if gap is None:
        gap = vi_gap(spec, profile, gradients=gradients)
    costs = evaluate_costs(spec, profile, loads=loads)
    reduced = reduced_costs(spec, costs) if supports_reduced_costs(spec) else None
    wardrop = check_wardrop(spec, profile, eps=np.inf)
    boundary = any(
        mass > 0.0 and float(flow.values.min()) <= support_threshold(mass)
        for mass, flow in zip(spec.weights, profile.flows)
    )
    return EquilibriumReport(
        game=spec,
        profile=profile,
        loads=loads,
        costs=costs,
        reduced=reduced,
        vi_gap=gap,
        wardrop_slack=wardrop.worst_slack,
        boundary=boundary,
        status=status,
        iterations=iterations,
        trace=trace,
    )
