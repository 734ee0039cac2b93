"""Coefficient fields, polynomial fields and smooth test fields.

A coefficient is any callable ``f(x, y)`` that broadcasts over numpy arrays.
Polynomials are stored as ``(i, j, c)`` monomial triples meaning ``c * x**i * y**j``,
the same format the JSON config uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import CoefficientError

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]

FIELD_NAMES = ("Gamma1", "Gamma2", "gamma1", "f1", "f2")


@dataclass(frozen=True)
class Polynomial:
    """Bivariate polynomial ``sum c * x**i * y**j``."""

    terms: tuple[tuple[int, int, float], ...] = ()

    def __init__(self, terms: Iterable[Sequence[float]] = ()):
        cleaned = []
        for term in terms:
            if len(term) != 3:
                raise CoefficientError(f"monomial must be (i, j, c), got {term!r}")
            i, j, c = term
            if int(i) != i or int(j) != j or i < 0 or j < 0:
                raise CoefficientError(f"monomial exponents must be non-negative integers, got {term!r}")
            cleaned.append((int(i), int(j), float(c)))
        object.__setattr__(self, "terms", tuple(cleaned))

    @classmethod
    def constant(cls, c: float) -> "Polynomial":
        return cls([(0, 0, c)])

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for i, j, c in self.terms:
            out = out + c * x**i * y**j
        return out

    def dx(self) -> "Polynomial":
        return Polynomial([(i - 1, j, c * i) for i, j, c in self.terms if i > 0])

    def dy(self) -> "Polynomial":
        return Polynomial([(i, j - 1, c * j) for i, j, c in self.terms if j > 0])

    @property
    def degree(self) -> int:
        return max((i + j for i, j, _ in self.terms), default=0)

    @classmethod
    def random(cls, rng: np.random.Generator, degree: int, scale: float = 1.0) -> "Polynomial":
        terms = [(i, d - i, scale * rng.standard_normal()) for d in range(degree + 1) for i in range(d + 1)]
        return cls(terms)


def as_field(value) -> ScalarField:
    """Coerce a number, monomial list or callable into a scalar field."""
    if callable(value):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool):
        return Polynomial.constant(float(value))
    if isinstance(value, (list, tuple)):
        return Polynomial(value)
    raise CoefficientError(f"cannot interpret {value!r} as a coefficient field")


@dataclass(frozen=True)
class CoefficientValues:
    Gamma1: np.ndarray
    Gamma2: np.ndarray
    gamma1: np.ndarray
    f1: np.ndarray
    f2: np.ndarray


@dataclass(frozen=True)
class CoefficientSet:
    """The prescribed 1-forms Gamma = (Gamma1, Gamma2), the scalar gamma1 and the
    source F = (f1, f2). The second component of gamma is fixed at zero.
    """

    Gamma1: ScalarField = field(default_factory=lambda: Polynomial.constant(1.0))
    Gamma2: ScalarField = field(default_factory=lambda: Polynomial.constant(0.0))
    gamma1: ScalarField = field(default_factory=lambda: Polynomial.constant(2.0))
    f1: ScalarField = field(default_factory=lambda: Polynomial.constant(1.0))
    f2: ScalarField = field(default_factory=lambda: Polynomial.constant(0.0))

    def __post_init__(self):
        for name in FIELD_NAMES:
            object.__setattr__(self, name, as_field(getattr(self, name)))

    def evaluate(self, x, y) -> CoefficientValues:
        """Evaluate every field at the given points.

        Raises
        ------
        CoefficientError
            If a field raises or returns a non-finite value.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        vals = {}
        for name in FIELD_NAMES:
            try:
                v = np.broadcast_to(np.asarray(getattr(self, name)(x, y), dtype=float), shape)
            except CoefficientError:
                raise
            except Exception as exc:  # noqa: BLE001 - user fields can fail arbitrarily
                raise CoefficientError(f"evaluation of {name} failed: {exc}") from exc
            if not np.all(np.isfinite(v)):
                raise CoefficientError(f"{name} is not finite at some evaluation point")
            vals[name] = v
        return CoefficientValues(**vals)

    def with_fields(self, **overrides) -> "CoefficientSet":
        unknown = set(overrides) - set(FIELD_NAMES)
        if unknown:
            raise CoefficientError(f"unknown coefficient field(s): {sorted(unknown)}")
        return replace(self, **{k: as_field(v) for k, v in overrides.items()})


def _affine() -> CoefficientSet:
    return CoefficientSet(
        Gamma1=Polynomial([(0, 0, 1.0), (1, 0, 0.25)]),
        Gamma2=Polynomial([(0, 1, 0.1)]),
        gamma1=Polynomial([(0, 0, 2.0), (1, 0, 0.5)]),
        f1=Polynomial([(0, 0, 1.0), (1, 0, 1.0)]),
        f2=Polynomial([(0, 1, 1.0)]),
    )


def _product() -> CoefficientSet:
    return CoefficientSet(
        Gamma1=Polynomial([(0, 0, 1.0), (2, 2, 0.5)]),
        Gamma2=Polynomial([(1, 1, 0.25)]),
        gamma1=Polynomial([(0, 0, 2.0), (1, 1, 1.0)]),
        f1=Polynomial([(0, 0, 1.0), (1, 1, 1.0)]),
        f2=Polynomial.constant(0.0),
    )


PRESETS: dict[str, Callable[[], CoefficientSet]] = {
    "default": CoefficientSet,
    "constant": CoefficientSet,
    "affine": _affine,
    "product": _product,
}


def preset(name: str, **overrides) -> CoefficientSet:
    """Named coefficient preset, optionally with individual fields replaced.

    ``default`` (and its alias ``constant``) is Gamma=(1,0), gamma1=2, F=(1,0).
    """
    try:
        base = PRESETS[name]()
    except KeyError:
        raise CoefficientError(f"unknown coefficient preset {name!r}; choose from {sorted(PRESETS)}") from None
    return base.with_fields(**overrides) if overrides else base


@dataclass(frozen=True)
class SmoothField:
    """A 1-form U = (u1, u2) with analytic first partials.

    Each attribute is a callable ``(x, y) -> array of shape (2, ...)``.
    """

    value: Callable
    dx: Callable
    dy: Callable

    def __call__(self, x, y):
        return self.value(x, y)

    @classmethod
    def from_polynomials(cls, p1: Polynomial, p2: Polynomial) -> "SmoothField":
        d1x, d1y, d2x, d2y = p1.dx(), p1.dy(), p2.dx(), p2.dy()
        return cls(
            value=lambda x, y: np.stack(np.broadcast_arrays(p1(x, y), p2(x, y))),
            dx=lambda x, y: np.stack(np.broadcast_arrays(d1x(x, y), d2x(x, y))),
            dy=lambda x, y: np.stack(np.broadcast_arrays(d1y(x, y), d2y(x, y))),
        )

    @classmethod
    def constant(cls, c1: float, c2: float) -> "SmoothField":
        return cls.from_polynomials(Polynomial.constant(c1), Polynomial.constant(c2))


def manufactured_default() -> SmoothField:
    """U* = (sin x cos y, x**2 - y)."""
    return SmoothField(
        value=lambda x, y: np.stack(np.broadcast_arrays(np.sin(x) * np.cos(y), x**2 - y)),
        dx=lambda x, y: np.stack(np.broadcast_arrays(np.cos(x) * np.cos(y), 2.0 * x)),
        dy=lambda x, y: np.stack(np.broadcast_arrays(-np.sin(x) * np.sin(y), -np.ones_like(np.asarray(y, float)))),
    )


def zero_field() -> SmoothField:
    return SmoothField.constant(0.0, 0.0)
