"""Per-unit charging cost functions.

Every slot of the horizon carries a per-unit cost f(L_t + P*z_t), where f
is convex, strictly increasing, nonnegative and continuously differentiable
on a validity interval [0, W].  Three named families cover the usual
distribution-network metrics: a linear tariff, quadratic Joule losses and
exponential equipment ageing.  Host programs can plug in their own family
through :class:`CustomCost`, which is spot-checked for the same shape
requirements on a sample grid.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DomainError, SpecError

# Slack on domain checks so loads assembled from renormalized flows do not
# trip the upper bound by float rounding.
DOMAIN_SLACK = 1e-9

# Sample-grid size used to spot-check custom families.
VALIDATION_GRID_SIZE = 256

# Tolerated curvature noise when spot-checking convexity on the grid.
CONVEXITY_TOL = 1e-9


class CostFunction(abc.ABC):
    """Per-unit cost family: convex, strictly increasing, C1 on [0, W].

    ``domain_bound`` is the upper end W of the validity interval.  ``None``
    means "not yet pinned to a game"; it is resolved when the family is
    attached to a :class:`~chargegame.model.GameSpec`.  ``smooth`` records
    whether a continuous second derivative exists as well (true for the
    named families).
    """

    domain_bound: float | None
    smooth: bool

    @abc.abstractmethod
    def _raw_value(self, load: np.ndarray) -> np.ndarray:
        """f(load) without domain checks."""

    @abc.abstractmethod
    def _raw_derivative(self, load: np.ndarray) -> np.ndarray:
        """f'(load) without domain checks."""

    def has_derivative(self) -> bool:
        return True

    def value(self, load):
        """Evaluate f at a scalar or array load inside [0, W]."""
        arr = self._check_domain(load)
        out = self._raw_value(arr)
        return float(out) if np.ndim(load) == 0 else out

    def derivative(self, load):
        """Evaluate f' at a scalar or array load inside [0, W]."""
        if not self.has_derivative():
            raise SpecError(f"{type(self).__name__} provides no derivative")
        arr = self._check_domain(load)
        out = self._raw_derivative(arr)
        return float(out) if np.ndim(load) == 0 else out

    def _check_domain(self, load) -> np.ndarray:
        arr = np.asarray(load, dtype=float)
        if arr.size:
            lo = float(arr.min())
            if lo < -DOMAIN_SLACK:
                raise DomainError(f"load {lo} lies below the validity interval [0, W]")
            bound = self.domain_bound
            if bound is not None:
                hi = float(arr.max())
                if hi > bound + DOMAIN_SLACK * max(1.0, bound):
                    raise DomainError(
                        f"load {hi} lies above the validity interval [0, {bound}]"
                    )
        return arr


@dataclass(frozen=True)
class LinearCost(CostFunction):
    """f(x) = slope * x + intercept with slope > 0 and intercept >= 0."""

    slope: float = 1.0
    intercept: float = 0.0
    domain_bound: float | None = None

    smooth = True

    def __post_init__(self):
        if self.slope <= 0:
            raise SpecError("linear cost requires a positive slope")
        if self.intercept < 0:
            raise SpecError("linear cost requires a nonnegative intercept")
        _check_bound(self.domain_bound)

    def _raw_value(self, load):
        return self.slope * load + self.intercept

    def _raw_derivative(self, load):
        return np.full_like(load, self.slope)


@dataclass(frozen=True)
class QuadraticCost(CostFunction):
    """f(x) = x**2, the Joule-loss metric."""

    domain_bound: float | None = None

    smooth = True

    def __post_init__(self):
        _check_bound(self.domain_bound)

    def _raw_value(self, load):
        return load * load

    def _raw_derivative(self, load):
        return 2.0 * load


@dataclass(frozen=True)
class ExponentialCost(CostFunction):
    """f(x) = exp(rate * x) with rate > 0, the equipment-ageing metric."""

    rate: float = 1.0
    domain_bound: float | None = None

    smooth = True

    def __post_init__(self):
        if self.rate <= 0:
            raise SpecError("exponential cost requires a positive rate")
        _check_bound(self.domain_bound)

    def _raw_value(self, load):
        return np.exp(self.rate * load)

    def _raw_derivative(self, load):
        return self.rate * np.exp(self.rate * load)


@dataclass(frozen=True)
class CustomCost(CostFunction):
    """Host-supplied cost family.

    ``value_fn`` (and ``derivative_fn`` when given) must accept numpy
    arrays.  The validity interval must be declared up front because the
    shape requirements (finite, nonnegative, strictly increasing, convex)
    are spot-checked on a uniform sample grid of [0, domain_bound] at
    construction; the derivative is trusted as supplied.
    """

    value_fn: Callable[[np.ndarray], np.ndarray]
    derivative_fn: Callable[[np.ndarray], np.ndarray] | None
    domain_bound: float
    smooth: bool = False

    def __post_init__(self):
        if self.domain_bound is None or self.domain_bound <= 0:
            raise SpecError("custom cost requires a positive domain_bound")
        grid = np.linspace(0.0, self.domain_bound, VALIDATION_GRID_SIZE)
        values = np.asarray(self.value_fn(grid), dtype=float)
        if values.shape != grid.shape or not np.all(np.isfinite(values)):
            raise SpecError("custom cost values must be finite over [0, W]")
        if values.min() < -CONVEXITY_TOL:
            raise SpecError("custom cost must be nonnegative on [0, W]")
        if np.diff(values).min() <= 0:
            raise SpecError("custom cost must be strictly increasing on [0, W]")
        second = values[2:] - 2.0 * values[1:-1] + values[:-2]
        if second.min() < -CONVEXITY_TOL:
            raise SpecError("custom cost must be convex on [0, W]")

    def has_derivative(self) -> bool:
        return self.derivative_fn is not None

    def _raw_value(self, load):
        return np.asarray(self.value_fn(load), dtype=float)

    def _raw_derivative(self, load):
        return np.asarray(self.derivative_fn(load), dtype=float)


@dataclass(frozen=True)
class AffineCost(CostFunction):
    """scale * f(x) + shift around a base family, with scale > 0.

    Equilibria are invariant under this transformation, which is what the
    wrapper exists to exercise; the shift may therefore be negative even
    though that can break the nonnegativity the base family guarantees.
    """

    base: CostFunction
    scale: float
    shift: float

    def __post_init__(self):
        if self.scale <= 0:
            raise SpecError("affine transform requires a positive scale")

    @property
    def domain_bound(self) -> float | None:
        return self.base.domain_bound

    @property
    def smooth(self) -> bool:
        return self.base.smooth

    def has_derivative(self) -> bool:
        return self.base.has_derivative()

    def _raw_value(self, load):
        return self.scale * self.base._raw_value(load) + self.shift

    def _raw_derivative(self, load):
        return self.scale * self.base._raw_derivative(load)


def affine_transform(base: CostFunction, scale: float, shift: float) -> CostFunction:
    """Return the family computing scale * f + shift (scale > 0)."""
    return AffineCost(base, scale, shift)


def with_domain_bound(fn: CostFunction, bound: float) -> CostFunction:
    """Copy of ``fn`` with the validity interval pinned to [0, bound]."""
    if bound <= 0:
        raise SpecError("domain bound must be positive")
    if isinstance(fn, AffineCost):
        return AffineCost(with_domain_bound(fn.base, bound), fn.scale, fn.shift)
    return replace(fn, domain_bound=bound)


def cost_from_config(cfg: dict) -> CostFunction:
    """Build a named family from a config mapping.

    Recognized kinds: ``linear`` (slope, intercept), ``quadratic``,
    ``exponential`` (rate) and ``affine`` (base, scale, shift); every kind
    accepts an optional ``domain_bound``.
    """
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise SpecError("cost config must be a mapping with a 'kind' entry")
    kind = cfg["kind"]
    bound = cfg.get("domain_bound")
    if kind == "linear":
        return LinearCost(
            slope=float(cfg.get("slope", 1.0)),
            intercept=float(cfg.get("intercept", 0.0)),
            domain_bound=bound,
        )
    if kind == "quadratic":
        return QuadraticCost(domain_bound=bound)
    if kind == "exponential":
        return ExponentialCost(rate=float(cfg.get("rate", 1.0)), domain_bound=bound)
    if kind == "affine":
        return AffineCost(
            base=cost_from_config(cfg["base"]),
            scale=float(cfg.get("scale", 1.0)),
            shift=float(cfg.get("shift", 0.0)),
        )
    raise SpecError(f"unknown cost kind {kind!r}")


def cost_to_config(fn: CostFunction) -> dict:
    """Inverse of :func:`cost_from_config` for the serializable families."""
    if isinstance(fn, LinearCost):
        return {
            "kind": "linear",
            "slope": fn.slope,
            "intercept": fn.intercept,
            "domain_bound": fn.domain_bound,
        }
    if isinstance(fn, QuadraticCost):
        return {"kind": "quadratic", "domain_bound": fn.domain_bound}
    if isinstance(fn, ExponentialCost):
        return {"kind": "exponential", "rate": fn.rate, "domain_bound": fn.domain_bound}
    if isinstance(fn, AffineCost):
        return {
            "kind": "affine",
            "base": cost_to_config(fn.base),
            "scale": fn.scale,
            "shift": fn.shift,
        }
    raise SpecError(f"{type(fn).__name__} is not serializable to config form")


def _check_bound(bound: float | None) -> None:
    if bound is not None and bound <= 0:
        raise SpecError("domain bound must be positive")
