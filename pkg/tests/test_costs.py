"""Cost-family values, derivatives, shape validation and transforms."""

import math

import numpy as np
import pytest

from chargegame import (
    AffineCost,
    CustomCost,
    DomainError,
    ExponentialCost,
    LinearCost,
    QuadraticCost,
    SpecError,
    affine_transform,
    cost_from_config,
    cost_to_config,
    with_domain_bound,
)

FAMILIES = [
    LinearCost(slope=1.0, intercept=0.0, domain_bound=5.0),
    LinearCost(slope=1.7, intercept=0.3, domain_bound=5.0),
    QuadraticCost(domain_bound=5.0),
    ExponentialCost(rate=1.0, domain_bound=5.0),
    ExponentialCost(rate=0.4, domain_bound=5.0),
]


def test_named_family_values():
    assert QuadraticCost().value(1.75) == pytest.approx(3.0625, abs=1e-15)
    assert ExponentialCost(rate=1.0).value(0.0) == pytest.approx(1.0, abs=1e-15)
    assert LinearCost(slope=1.0, intercept=0.0).value(2.3) == pytest.approx(2.3)


def test_named_family_derivatives():
    assert QuadraticCost().derivative(2.0) == pytest.approx(4.0, abs=1e-15)
    assert LinearCost(slope=1.0).derivative(0.37) == pytest.approx(1.0)
    assert ExponentialCost(rate=1.0).derivative(0.0) == pytest.approx(1.0)


@pytest.mark.parametrize("fn", FAMILIES, ids=lambda f: type(f).__name__ + repr(f)[:24])
def test_derivative_matches_finite_differences(fn):
    """f' agrees with central differences to 1e-6 relative on a 100-point grid."""
    grid = np.linspace(0.0, fn.domain_bound, 102)[1:-1]
    h = 1e-6
    fd = (fn.value(grid + h) - fn.value(grid - h)) / (2.0 * h)
    analytic = fn.derivative(grid)
    assert np.all(np.abs(analytic - fd) <= 1e-6 * np.maximum(1.0, np.abs(fd)))


@pytest.mark.parametrize("fn", FAMILIES, ids=lambda f: type(f).__name__ + repr(f)[:24])
def test_monotone_and_convex_on_grid(fn):
    grid = np.linspace(0.0, fn.domain_bound, 100)
    values = fn.value(grid)
    assert np.diff(values).min() > 0
    second = values[2:] - 2 * values[1:-1] + values[:-2]
    assert second.min() >= -1e-9


def test_scalar_and_array_evaluation_agree():
    fn = QuadraticCost(domain_bound=4.0)
    arr = np.array([0.0, 1.0, 1.75])
    assert isinstance(fn.value(1.75), float)
    np.testing.assert_allclose(fn.value(arr), [0.0, 1.0, 3.0625])


def test_domain_errors():
    fn = QuadraticCost(domain_bound=2.0)
    with pytest.raises(DomainError):
        fn.value(2.5)
    with pytest.raises(DomainError):
        fn.value(-0.5)
    with pytest.raises(DomainError):
        fn.derivative(np.array([0.5, 3.0]))
    # unresolved bound: only the lower end is enforced
    assert QuadraticCost().value(100.0) == 10000.0


def test_structural_validation():
    with pytest.raises(SpecError):
        LinearCost(slope=0.0)
    with pytest.raises(SpecError):
        LinearCost(slope=1.0, intercept=-0.1)
    with pytest.raises(SpecError):
        ExponentialCost(rate=-1.0)
    with pytest.raises(SpecError):
        QuadraticCost(domain_bound=-2.0)


def test_affine_transform_values():
    doubled = affine_transform(QuadraticCost(domain_bound=5.0), 2.0, 3.0)
    assert doubled.value(2.0) == pytest.approx(11.0)
    assert doubled.derivative(2.0) == pytest.approx(8.0)
    identity = affine_transform(LinearCost(1.0, 0.0, domain_bound=5.0), 1.0, 0.0)
    assert identity.value(1.3) == pytest.approx(1.3)
    with pytest.raises(SpecError):
        affine_transform(QuadraticCost(), -1.0, 0.0)
    with pytest.raises(SpecError):
        affine_transform(QuadraticCost(), 0.0, 1.0)


def test_affine_transform_inherits_domain_and_smoothness():
    base = ExponentialCost(rate=0.5, domain_bound=3.0)
    wrapped = affine_transform(base, 2.0, -1.0)
    assert wrapped.domain_bound == 3.0
    assert wrapped.smooth
    with pytest.raises(DomainError):
        wrapped.value(3.5)


def test_custom_cost_accepts_valid_family():
    fn = CustomCost(
        value_fn=lambda x: np.cosh(x),
        derivative_fn=lambda x: np.sinh(x),
        domain_bound=3.0,
    )
    assert fn.value(0.0) == pytest.approx(1.0)
    assert fn.derivative(1.0) == pytest.approx(math.sinh(1.0))


def test_custom_cost_rejects_bad_shapes():
    with pytest.raises(SpecError):  # decreasing
        CustomCost(lambda x: -x, None, domain_bound=2.0)
    with pytest.raises(SpecError):  # concave
        CustomCost(lambda x: np.sqrt(x + 0.01), None, domain_bound=2.0)
    with pytest.raises(SpecError):  # negative
        CustomCost(lambda x: x - 1.0, None, domain_bound=2.0)
    with pytest.raises(SpecError):  # no declared interval
        CustomCost(lambda x: x, None, domain_bound=None)


def test_custom_cost_without_derivative():
    fn = CustomCost(lambda x: x * x, None, domain_bound=2.0)
    assert not fn.has_derivative()
    with pytest.raises(SpecError):
        fn.derivative(1.0)


def test_with_domain_bound():
    fn = with_domain_bound(QuadraticCost(), 7.0)
    assert fn.domain_bound == 7.0
    wrapped = with_domain_bound(affine_transform(QuadraticCost(), 2.0, 0.0), 7.0)
    assert wrapped.domain_bound == 7.0
    with pytest.raises(SpecError):
        with_domain_bound(QuadraticCost(), 0.0)


def test_config_round_trip():
    for fn in [
        LinearCost(1.5, 0.25, domain_bound=9.0),
        QuadraticCost(domain_bound=4.0),
        ExponentialCost(rate=0.8, domain_bound=6.0),
        AffineCost(QuadraticCost(domain_bound=4.0), 2.0, 3.0),
    ]:
        rebuilt = cost_from_config(cost_to_config(fn))
        assert rebuilt == fn


def test_config_errors():
    with pytest.raises(SpecError):
        cost_from_config({"kind": "cubic"})
    with pytest.raises(SpecError):
        cost_from_config(["linear"])
