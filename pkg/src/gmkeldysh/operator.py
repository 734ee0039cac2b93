"""The symmetric first-order operator L U = A1 U_x + A2 U_y + B U.

All functions broadcast: ``p`` may be a :class:`Point` or any ``(x, y)`` pair
of equally shaped arrays, and matrix results carry the two matrix axes last.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .coefficients import CoefficientSet, SmoothField
from .errors import ConsistencyError, DegenerateLineError, InvalidDirectionError, TransformSingularError

IDENTITY_TOL = 1e-12


class Point(NamedTuple):
    x: float
    y: float


class MixedType(enum.Enum):
    ELLIPTIC = "Elliptic"
    PARABOLIC = "Parabolic"
    HYPERBOLIC = "Hyperbolic"


def _xy(p):
    x, y = p
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def _mat(a11, a12, a21, a22):
    a11, a12, a21, a22 = np.broadcast_arrays(a11, a12, a21, a22)
    return np.stack([np.stack([a11, a12], -1), np.stack([a21, a22], -1)], -2)


@dataclass(frozen=True)
class OperatorMatrices:
    A1: np.ndarray
    A2: np.ndarray
    B: np.ndarray

    @property
    def B_sym(self) -> np.ndarray:
        return 0.5 * (self.B + np.swapaxes(self.B, -1, -2))


@dataclass(frozen=True)
class QMatrix:
    q11: np.ndarray
    q12: np.ndarray
    q22: np.ndarray

    @property
    def det(self):
        return self.q11 * self.q22 - self.q12**2

    @property
    def positive_definite(self):
        return (self.q11 > 0) & (self.det > 0)

    def as_array(self) -> np.ndarray:
        return _mat(self.q11, self.q12, self.q12, self.q22)


def principal_matrices(p):
    """A1 and A2; they depend on the point only."""
    x, y = _xy(p)
    zero = np.zeros(np.broadcast(x, y).shape)
    A1 = _mat(1.0 - x**2, zero, zero, y**2 - 1.0)
    A2 = _mat(-2.0 * x * y, 1.0 - y**2, 1.0 - y**2, zero)
    return A1, A2


def principal_divergence(p):
    """Analytic d(A1)/dx and d(A2)/dy."""
    x, y = _xy(p)
    zero = np.zeros(np.broadcast(x, y).shape)
    dA1 = _mat(-2.0 * x, zero, zero, zero)
    dA2 = _mat(-2.0 * x, -2.0 * y, -2.0 * y, zero)
    return dA1, dA2


def assemble_matrices(p, c: CoefficientSet) -> OperatorMatrices:
    x, y = _xy(p)
    v = c.evaluate(x, y)
    A1, A2 = principal_matrices((x, y))
    B = _mat(
        x * y * v.Gamma2 + v.gamma1 - 2.0 * x,
        -x * y * v.Gamma1 - 2.0 * y,
        v.Gamma2 * (y**2 - 1.0),
        v.Gamma1 * (1.0 - y**2),
    )
    return OperatorMatrices(A1, A2, B)


def q_closed_form(p, c: CoefficientSet) -> QMatrix:
    x, y = _xy(p)
    v = c.evaluate(x, y)
    return QMatrix(
        q11=x * y * v.Gamma2 + v.gamma1,
        q12=-0.5 * x * y * v.Gamma1 + 0.5 * v.Gamma2 * (y**2 - 1.0),
        q22=v.Gamma1 * (1.0 - y**2),
    )


def q_from_symmetric_part(p, c: CoefficientSet) -> np.ndarray:
    """B* - (dA1/dx + dA2/dy)/2 as a stacked 2x2 array."""
    m = assemble_matrices(p, c)
    dA1, dA2 = principal_divergence(p)
    return m.B_sym - 0.5 * (dA1 + dA2)


def q_matrix(p, c: CoefficientSet, tol: float = IDENTITY_TOL) -> QMatrix:
    """Q from its closed-form entries, cross-checked against B* - (A1_x + A2_y)/2.

    Raises
    ------
    ConsistencyError
        If the two routes disagree by more than ``tol`` anywhere.
    """
    q = q_closed_form(p, c)
    other = q_from_symmetric_part(p, c)
    err = np.max(np.abs(q.as_array() - other), initial=0.0)
    if not err <= tol:
        raise ConsistencyError(f"closed-form Q differs from B* - div(A)/2 by {err:.3e}")
    return q


@dataclass(frozen=True)
class GboundReport:
    passed: np.ndarray
    margin: np.ndarray
    bound: np.ndarray
    gamma1_positive: np.ndarray
    q_positive_definite: np.ndarray

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def all_positive_definite(self) -> bool:
        return bool(np.all(self.q_positive_definite))


def gbound_lower_bound(p, c: CoefficientSet):
    """Pointwise lower bound that |gamma1| must reach."""
    x, y = _xy(p)
    v = c.evaluate(x, y)
    return 0.25 * (x * y * v.Gamma1 + (y**2 - 1.0) * v.Gamma2) ** 2 / np.abs(v.Gamma1 * (1.0 - y**2))


def check_gbound(p, c: CoefficientSet) -> GboundReport:
    """Evaluate the coefficient inequality and, separately, definiteness of Q.

    The inequality ``Gamma1 > 0 and |gamma1| >= bound`` admits ``det Q = 0`` at
    equality, so the direct test ``q11 > 0 and det Q > 0`` is reported too.
    """
    x, y = _xy(p)
    if np.any(np.abs(1.0 - y**2) == 0.0):
        raise DegenerateLineError("check_gbound evaluated on the line y**2 = 1")
    v = c.evaluate(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = gbound_lower_bound((x, y), c)
    margin = np.abs(v.gamma1) - bound
    gpos = v.Gamma1 > 0
    q = q_closed_form((x, y), c)
    return GboundReport(
        passed=gpos & (margin >= 0),
        margin=margin,
        bound=bound,
        gamma1_positive=gpos,
        q_positive_definite=q.positive_definite,
    )


def classify_type(p, tol: float = 1e-12) -> MixedType:
    x, y = p
    r2 = x * x + y * y
    if r2 < 1.0 - tol:
        return MixedType.ELLIPTIC
    if r2 > 1.0 + tol:
        return MixedType.HYPERBOLIC
    return MixedType.PARABOLIC


def char_form(p, d):
    """Characteristic quadratic form -(1-y^2)dx^2 - 2xy dx dy - (1-x^2)dy^2.

    With n1 = dy this equals alpha * n1, so it stays finite where alpha does not.
    """
    x, y = _xy(p)
    dx, dy = (np.asarray(t, dtype=float) for t in d)
    if np.any((dx == 0) & (dy == 0)):
        raise InvalidDirectionError("direction (0, 0) has no characteristic value")
    return -(1.0 - y**2) * dx**2 - 2.0 * x * y * dx * dy - (1.0 - x**2) * dy**2


def char_discriminant(p):
    """Discriminant of the characteristic form in (dx : dy); positive iff two real roots."""
    x, y = _xy(p)
    return (x * y) ** 2 - (1.0 - y**2) * (1.0 - x**2)


def _matvec(M, v):
    # M: (..., 2, 2); v: (2, ...)
    return np.stack([M[..., 0, 0] * v[0] + M[..., 0, 1] * v[1], M[..., 1, 0] * v[0] + M[..., 1, 1] * v[1]])


def operator_action(U, Ux, Uy, p, c: CoefficientSet):
    """A1 U_x + A2 U_y + B U for given values and partials of shape (2, ...)."""
    m = assemble_matrices(p, c)
    U, Ux, Uy = (np.asarray(a, dtype=float) for a in (U, Ux, Uy))
    return _matvec(m.A1, Ux) + _matvec(m.A2, Uy) + _matvec(m.B, U)


def apply_operator(field: SmoothField, p, c: CoefficientSet):
    x, y = _xy(p)
    return operator_action(field.value(x, y), field.dx(x, y), field.dy(x, y), (x, y), c)


def original_lhs(U, Ux, Uy, p, c: CoefficientSet):
    """Left-hand sides of the original (non-symmetric) first-order system."""
    x, y = _xy(p)
    v = c.evaluate(x, y)
    u1, u2 = U
    u1x, u2x = Ux
    u1y, u2y = Uy
    first = (
        (1.0 - x**2) * u1x
        - x * y * (u1y + u2x)
        + (1.0 - y**2) * u2y
        - (2.0 * x - v.gamma1) * u1
        - 2.0 * y * u2
    )
    second = u1y - u2x - (u1 * v.Gamma2 - u2 * v.Gamma1)
    return np.stack(np.broadcast_arrays(first, second))


def original_residual(U, Ux, Uy, p, c: CoefficientSet):
    x, y = _xy(p)
    v = c.evaluate(x, y)
    return original_lhs(U, Ux, Uy, (x, y), c) - np.stack(np.broadcast_arrays(v.f1, v.f2))


def rhs_matrix(p):
    """T = [[1, -xy], [0, 1 - y^2]], mapping original right sides to symmetric ones."""
    x, y = _xy(p)
    return _mat(np.ones_like(x * y), -x * y, np.zeros_like(x * y), 1.0 - y**2)


def rhs_transform(p, F):
    x, y = _xy(p)
    if np.any(1.0 - y**2 == 0.0):
        raise TransformSingularError("right-hand-side transform is singular on y**2 = 1")
    return _matvec(rhs_matrix((x, y)), np.asarray(F, dtype=float))


def symmetric_source(p, c: CoefficientSet):
    """T (f1, f2): the source term of the symmetric system."""
    x, y = _xy(p)
    v = c.evaluate(x, y)
    return rhs_transform((x, y), np.stack(np.broadcast_arrays(v.f1, v.f2)))
