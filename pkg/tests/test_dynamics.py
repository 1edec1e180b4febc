"""Learning dynamics: gradients, update map, convergence behavior."""

import numpy as np
import pytest

from chargegame import (
    ExponentialCost,
    GameSpec,
    LearnerState,
    LinearCost,
    NumericsError,
    Profile,
    QuadraticCost,
    SolverStatus,
    ThreeSlotInstance,
    UndefinedAverageError,
    coalition_average_cost,
    coalition_gradient,
    learning_step,
    player_gradients,
    solve_dynamics,
    strategy_costs,
)
from chargegame.dynamics import initial_state
from conftest import random_profile, random_three_slot


def directional_fd(spec, profile, k, s, t, h=1e-6):
    """Central difference of the coalition cost along e_s - e_t."""
    rows = profile.matrix()

    def shifted(delta):
        bumped = rows.copy()
        bumped[k, s] += delta
        bumped[k, t] -= delta
        return Profile.from_rows(spec, bumped)

    return (
        coalition_average_cost(spec, shifted(h), k)
        - coalition_average_cost(spec, shifted(-h), k)
    ) / (2.0 * h)


# --- coalition gradient ------------------------------------------------------


def test_gradient_of_negligible_coalition_is_scaled_strategy_cost():
    tiny = 1e-9
    spec = GameSpec(
        3, 2, 1.0, np.array([1.5, 1, 1]), QuadraticCost(),
        np.array([1.0 - tiny, tiny]),
    )
    profile = Profile.from_rows(
        spec, [[0.25 * (1 - tiny), 0.75 * (1 - tiny)], [0.25 * tiny, 0.75 * tiny]]
    )
    grad = coalition_gradient(spec, profile, 1)
    costs = strategy_costs(spec, profile)
    np.testing.assert_allclose(tiny * grad, costs, rtol=1e-6)


def test_gradient_stationary_at_quadratic_optimum():
    spec = GameSpec(
        3, 2, 1.0, np.array([1.5, 1, 1]), QuadraticCost(), np.array([0.0, 1.0])
    )
    profile = Profile.from_rows(spec, [[0, 0], [23 / 64, 41 / 64]])
    grad = coalition_gradient(spec, profile, 1)
    assert grad[0] - grad[1] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("horizon,duration", [(3, 2), (7, 3)])
def test_gradient_matches_finite_differences(rng, horizon, duration):
    for _ in range(20):
        num_coalitions = int(rng.integers(1, 3))
        raw = rng.uniform(0.2, 1.0, size=num_coalitions + 1)
        spec = GameSpec(
            horizon,
            duration,
            float(rng.uniform(0.1, 1.0)),
            rng.uniform(0.0, 2.0, size=horizon),
            [LinearCost(), QuadraticCost(), ExponentialCost(rate=0.8)][
                int(rng.integers(0, 3))
            ],
            raw / raw.sum(),
        )
        profile = random_profile(rng, spec, margin=0.1)
        for k in range(1, spec.num_players):
            grad = coalition_gradient(spec, profile, k)
            s, t = 0, spec.num_start_slots - 1
            fd = directional_fd(spec, profile, k, s, t)
            assert grad[s] - grad[t] == pytest.approx(
                fd, rel=1e-6, abs=1e-6 * max(1.0, abs(fd))
            )


def test_gradient_errors():
    spec = GameSpec(
        3, 2, 1.0, np.ones(3), QuadraticCost(), np.array([1.0, 0.0])
    )
    profile = Profile.from_rows(spec, [[0.5, 0.5], [0, 0]])
    with pytest.raises(UndefinedAverageError):
        coalition_gradient(spec, profile, 1)
    with pytest.raises(IndexError):
        coalition_gradient(spec, profile, 2)


def test_player_gradients_rows():
    spec = GameSpec(
        3, 2, 1.0, np.array([1.5, 1, 1]), QuadraticCost(), np.array([0.5, 0.5])
    )
    profile = Profile.uniform(spec)
    rows = player_gradients(spec, profile)
    np.testing.assert_allclose(rows[0], strategy_costs(spec, profile), atol=1e-12)
    np.testing.assert_allclose(
        rows[1], coalition_gradient(spec, profile, 1), atol=1e-12
    )


# --- learning step -----------------------------------------------------------


def test_symmetric_start_stays_uniform():
    spec = GameSpec(4, 1, 0.5, np.full(4, 1.0), QuadraticCost(), np.array([0.5, 0.5]))
    state = initial_state(spec)
    for _ in range(10):
        state = learning_step(spec, state)
        for flow, mass in zip(state.profile.flows, spec.weights):
            np.testing.assert_allclose(flow.values, mass / 4.0, atol=1e-15)


def test_dominated_strategy_weight_strictly_decreases():
    spec = GameSpec(
        3, 2, 1.0, np.array([5.0, 1.0, 1.0]), LinearCost(), np.array([1.0])
    )
    state = initial_state(spec)
    previous = state.profile.flows[0].values[0]
    for _ in range(20):
        state = learning_step(spec, state)
        current = state.profile.flows[0].values[0]
        assert current < previous
        previous = current


def test_max_shift_invariance():
    spec = GameSpec(
        3, 2, 1.0, np.array([1.5, 1, 1]), QuadraticCost(), np.array([0.4, 0.6])
    )
    state = initial_state(spec)
    state = learning_step(spec, state)
    shifted = LearnerState(
        state.cum_costs + np.array([[100.0], [250.0]]),
        state.profile,
        state.iteration,
        state.step_size,
    )
    after = learning_step(spec, state)
    after_shifted = learning_step(spec, shifted)
    np.testing.assert_allclose(
        after.profile.matrix(), after_shifted.profile.matrix(), atol=1e-12
    )


def test_iterates_stay_on_scaled_simplices():
    spec = GameSpec(
        5, 2, 0.3, np.array([2.0, 1.5, 1.0, 0.5, 1.0]), QuadraticCost(),
        np.array([0.3, 0.7]),
    )
    state = initial_state(spec)
    for _ in range(50):
        state = learning_step(spec, state)
        for flow, mass in zip(state.profile.flows, spec.weights):
            assert float(flow.values.sum()) == pytest.approx(mass, abs=1e-12)
            assert float(flow.values.min()) >= 0.0


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_non_finite_costs_raise():
    spec = GameSpec(
        3, 2, 1.0, np.array([2.0, 1.0, 1.0]),
        ExponentialCost(rate=400.0), np.array([1.0]),
    )
    with pytest.raises(NumericsError):
        solve_dynamics(spec, max_iter=10)


# --- full solves -------------------------------------------------------------


def test_linear_gap_instance_converges_to_closed_form():
    inst = ThreeSlotInstance(2.3, 1.0, 1.0, 1.0, LinearCost())
    report = solve_dynamics(inst.to_game_spec())
    assert report.status is SolverStatus.CONVERGED
    assert report.vi_gap <= 1e-6
    assert report.profile.flows[1].values[0] == pytest.approx(0.175, abs=1e-3)


def test_quadratic_band_instance_converges_to_closed_form():
    inst = ThreeSlotInstance(1.5, 1.0, 1.0, 1.0, QuadraticCost())
    report = solve_dynamics(inst.to_game_spec())
    assert report.status is SolverStatus.CONVERGED
    assert report.profile.flows[1].values[0] == pytest.approx(0.359375, abs=1e-3)


def test_corner_equilibrium_flags_boundary():
    inst = ThreeSlotInstance(2.3, 1.0, 1.0, 0.2, LinearCost())
    report = solve_dynamics(inst.to_game_spec())
    assert report.status is SolverStatus.CONVERGED
    assert report.profile.flows[1].values[0] == pytest.approx(0.0, abs=1e-3)
    assert report.boundary


def test_non_convergence_is_reported_not_hidden():
    inst = ThreeSlotInstance(1.5, 1.0, 1.0, 1.0, QuadraticCost())
    report = solve_dynamics(inst.to_game_spec(), max_iter=3, gap_tol=1e-12)
    assert report.status is SolverStatus.MAX_ITER_REACHED
    assert report.vi_gap > 1e-12


def test_zero_mass_coalition_is_inert():
    spec = GameSpec(
        3, 2, 1.0, np.array([1.5, 1, 1]), QuadraticCost(), np.array([1.0, 0.0])
    )
    report = solve_dynamics(spec)
    assert report.status is SolverStatus.CONVERGED
    np.testing.assert_allclose(report.profile.flows[1].values, 0.0, atol=1e-15)
    assert report.profile.flows[0].values[0] == pytest.approx(0.25, abs=1e-3)


def test_linear_night_instance_reaches_gap_within_budget():
    loads = np.array([0.9, 1.0, 0.95, 0.7, 0.5, 0.45, 0.6])

    def night(m):
        return GameSpec(7, 3, 0.2, loads, LinearCost(), np.array([1.0 - m, m]))

    report = solve_dynamics(night(0.8))
    assert report.status is SolverStatus.CONVERGED
    assert report.iterations <= 100_000
    # At m = 0.5 the equilibrium ties an unused strategy at minimal cost and
    # the decreasing schedule stalls; the constant (linear-safe) rate converges.
    report = solve_dynamics(night(0.5), step_size=1.0)
    assert report.status is SolverStatus.CONVERGED
    assert report.iterations <= 100_000


def test_constant_step_size_accepted():
    inst = ThreeSlotInstance(1.5, 1.0, 1.0, 0.3, LinearCost())
    report = solve_dynamics(inst.to_game_spec(), step_size=1.0)
    assert report.status is SolverStatus.CONVERGED
    assert report.profile.flows[1].values[0] == pytest.approx(0.15, abs=1e-3)


def test_trace_records_iterations():
    inst = ThreeSlotInstance(1.5, 1.0, 1.0, 1.0, QuadraticCost())
    report = solve_dynamics(inst.to_game_spec(), trace_every=5)
    assert report.trace is not None
    assert report.trace[0].iteration == 0
    assert report.trace[-1].iteration == report.iterations
    gaps = [row.gap for row in report.trace]
    assert gaps[-1] <= 1e-6
    assert report.trace[0].flows.shape == (2, 2)


def test_wardrop_holds_at_converged_interior_point(rng):
    for _ in range(5):
        inst = random_three_slot(rng, family="linear", coalition_size=0.3)
        if inst.peak_load >= inst.offpeak_load + 1.0:
            continue
        spec = inst.to_game_spec()
        report = solve_dynamics(spec, gap_tol=1e-8)
        if report.status is not SolverStatus.CONVERGED:
            continue
        costs = strategy_costs(spec, report.profile)
        support = report.profile.flows[0].values > 1e-6
        if support.any():
            assert costs[support].max() <= costs.min() + 1e-5
