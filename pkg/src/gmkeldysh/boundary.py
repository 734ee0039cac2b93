"""Boundary matrix beta = n1 A1 + n2 A2, its splittings and admissibility checks.

Splittings per arc class (beta = beta_plus + beta_minus; the imposed condition
is beta_minus U = 0):

* ``Tau1`` (n1 > 0): beta_plus = diag(-alpha, 0); condition -n2 u1 + n1 u2 = 0.
* ``Tau2`` (n1 < 0): beta_minus = diag(-alpha, 0); condition u1 = 0.
* ``Characteristic``: beta_minus = 0, no condition.
* ``CornerFillet``: beta is positive semidefinite on the fillet, so the
  default ``"outflow"`` splitting takes beta_minus = 0 (no condition).  The
  upper-triangular ``"triangular"`` splitting (condition u1 = 0) is kept for
  comparison; its ranges overlap wherever n2 != 0.
* ``Degenerate`` (n1 = 0): beta_plus = [[b11/2, b12], [0, 0]],
  beta_minus = [[b11/2, 0], [b12, 0]]; condition u1 = 0, which is the common
  limit of both neighbouring arcs, and mu* = 0.

alpha = Phi / n1 where Phi is the characteristic form evaluated on the unit
tangent (-n2, n1); it is never needed where n1 vanishes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ClassificationMismatchError, NormalizationError
from .geometry import CLASSIFY_TOL, ArcClass, BoundarySamples, DomainSpec, Piece, sample_boundary
from .operator import _mat, _xy, char_form

FILLET_SPLITS = ("outflow", "triangular")
RANK_TOL = 1e-10
CHECK_TOL = 1e-10


def _normal(n, tol=1e-10):
    n1, n2 = (np.asarray(v, dtype=float) for v in n)
    if np.any(np.abs(np.hypot(n1, n2) - 1.0) > tol):
        raise NormalizationError("normal vector must have unit length")
    return n1, n2


def beta(p, n):
    """n1 A1 + n2 A2 (written out, no division)."""
    x, y = _xy(p)
    n1, n2 = _normal(n)
    return _mat(
        (1.0 - x**2) * n1 - 2.0 * x * y * n2,
        (1.0 - y**2) * n2,
        (1.0 - y**2) * n2,
        (y**2 - 1.0) * n1,
    )


def alpha(p, n):
    """Phi(p, tangent) / n1; infinite where n1 = 0 and Phi != 0."""
    n1, n2 = _normal(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        return char_form(p, (-n2, n1)) / n1


def alpha_literal(p, n):
    """[-(1-y^2) n2/n1 + 2xy - (1-x^2) n1/n2] n2, exactly as first written."""
    x, y = _xy(p)
    n1, n2 = _normal(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (-(1.0 - y**2) * n2 / n1 + 2.0 * x * y - (1.0 - x**2) * n1 / n2) * n2


def beta_alternate(p, n, rewritten: bool = True):
    """beta in the alternate form with (1,1) entry -alpha - (1-y^2) n2^2/n1.

    With ``rewritten=False`` the entry is evaluated literally, which is
    undefined at n1 = 0 or n2 = 0 and loses accuracy as n1 -> 0.  With
    ``rewritten=True`` alpha is split into its singular part
    -(1-y^2) n2^2/n1 and regular part 2xy n2 - (1-x^2) n1; the singular parts
    cancel additively and the entry is minus the regular part.
    """
    x, y = _xy(p)
    n1, n2 = _normal(n)
    if rewritten:
        alpha_regular = 2.0 * x * y * n2 - (1.0 - x**2) * n1
        b11 = -alpha_regular
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            b11 = -alpha_literal((x, y), (n1, n2)) - (1.0 - y**2) * n2**2 / n1
    return _mat(b11, (1.0 - y**2) * n2, (1.0 - y**2) * n2, (y**2 - 1.0) * n1)


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


@dataclass(frozen=True)
class BetaDecomposition:
    beta: np.ndarray
    beta_plus: np.ndarray
    beta_minus: np.ndarray
    mu_star: np.ndarray
    arc_class: np.ndarray

    @property
    def mu11(self):
        return self.mu_star[..., 0, 0]

    @property
    def det_mu(self):
        m = self.mu_star
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def _rank1_part(y, n1, n2):
    """(1-y^2) n2 [[-n2/n1, 1], [1, -n1/n2]] written without the n1/n2 quotient."""
    k = 1.0 - y**2
    with np.errstate(divide="ignore", invalid="ignore"):
        return _mat(-k * n2**2 / n1, k * n2, k * n2, -k * n1)


def _check_classes(cls, n1, tol):
    bad = ((cls == ArcClass.TAU1) & ~(n1 > tol)) | ((cls == ArcClass.TAU2) & ~(n1 < -tol))
    bad |= (cls == ArcClass.DEGENERATE) & (np.abs(n1) > tol)
    bad |= (cls == ArcClass.CHARACTERISTIC) & (n1 > tol)
    if np.any(bad):
        k = int(np.flatnonzero(bad.ravel())[0])
        raise ClassificationMismatchError(
            f"arc class {ArcClass(int(cls.ravel()[k])).label} is inconsistent with n1 = {n1.ravel()[k]:.3e}"
        )


def decompose(p, n, arc_class, fillet_split: str = "outflow", tol: float = CLASSIFY_TOL) -> BetaDecomposition:
    """Split beta according to the arc class (scalars or equally shaped arrays)."""
    if fillet_split not in FILLET_SPLITS:
        raise ValueError(f"fillet_split must be one of {FILLET_SPLITS}")
    x, y = _xy(p)
    n1, n2 = _normal(n)
    x, y, n1, n2 = np.broadcast_arrays(x, y, n1, n2)
    cls = np.broadcast_to(np.asarray(arc_class, dtype=int), x.shape)
    _check_classes(cls, n1, tol)

    b = beta((x, y), (n1, n2))
    zero = np.zeros(x.shape)
    tau = (cls == ArcClass.TAU1) | (cls == ArcClass.TAU2)
    safe_n1 = np.where(tau, n1, 1.0)
    a = np.where(tau, char_form((x, y), (-n2, n1)) / safe_n1, 0.0)
    diag_alpha = _mat(-a, zero, zero, zero)
    rank1 = _rank1_part(y, safe_n1, n2)

    plus = np.zeros(b.shape)
    minus = np.zeros(b.shape)

    def put(mask, bp, bm):
        m = mask[..., None, None]
        nonlocal plus, minus
        plus = np.where(m, bp, plus)
        minus = np.where(m, bm, minus)

    put(cls == ArcClass.TAU1, diag_alpha, rank1)
    put(cls == ArcClass.TAU2, rank1, diag_alpha)
    put(cls == ArcClass.CHARACTERISTIC, b, np.zeros_like(b))
    if fillet_split == "outflow":
        put(cls == ArcClass.CORNER_FILLET, b, np.zeros_like(b))
    else:
        upper = b.copy()
        upper[..., 1, 0] = 0.0
        put(cls == ArcClass.CORNER_FILLET, upper, b - upper)
    b11, b12 = b[..., 0, 0], b[..., 0, 1]
    put(cls == ArcClass.DEGENERATE, _mat(0.5 * b11, b12, zero, zero), _mat(0.5 * b11, zero, b12, zero))
    return BetaDecomposition(b, plus, minus, _sym(plus - minus), cls)


def boundary_condition_rows(arc_class, n, y=0.0, fillet_split: str = "outflow"):
    """Row vector r of the imposed condition r . U = g, and whether one is imposed.

    Returns ``(rows, active)`` with ``rows`` of shape (..., 2).
    """
    n1, n2 = (np.asarray(v, dtype=float) for v in n)
    cls, n1, n2, y = np.broadcast_arrays(np.asarray(arc_class, dtype=int), n1, n2, np.asarray(y, dtype=float))
    r1 = np.zeros(cls.shape)
    r2 = np.zeros(cls.shape)
    tau1 = cls == ArcClass.TAU1
    r1 = np.where(tau1, -n2, r1)
    r2 = np.where(tau1, n1, r2)
    u1_rows = (cls == ArcClass.TAU2) | (cls == ArcClass.DEGENERATE)
    r1 = np.where(u1_rows, 1.0, r1)
    active = tau1 | u1_rows
    if fillet_split == "triangular":
        fil = cls == ArcClass.CORNER_FILLET
        r1 = np.where(fil, (1.0 - y**2) * n2, r1)
        active = active | (fil & (n2 != 0.0))
    return np.stack([r1, r2], axis=-1), active


def _rank(M, scale):
    s = np.linalg.svd(M, compute_uv=False)
    return np.sum(s > RANK_TOL * scale[..., None], axis=-1)


@dataclass(frozen=True)
class AdmissibilityReport:
    mu11: np.ndarray
    det_mu: np.ndarray
    mu11_ok: np.ndarray
    det_ok: np.ndarray
    range_ok: np.ndarray
    span_ok: np.ndarray

    @property
    def ok(self):
        return self.mu11_ok & self.det_ok & self.range_ok & self.span_ok


def check_admissibility(d: BetaDecomposition, tol: float = CHECK_TOL) -> AdmissibilityReport:
    """Pointwise Friedrichs admissibility of a splitting.

    range_ok: range(beta_plus) and range(beta_minus) meet only in zero,
    i.e. rank [beta_plus | beta_minus] = rank beta_plus + rank beta_minus.
    span_ok: ker beta_plus + ker beta_minus is the whole plane, i.e. the
    stacked matrix [beta_plus; beta_minus] has rank equal to that same sum.
    Ranks use a common threshold 1e-10 * max(|beta|, |beta_plus|, |beta_minus|).
    """
    bp, bm = d.beta_plus, d.beta_minus
    scale = np.maximum.reduce([np.linalg.norm(m, ord=2, axis=(-2, -1)) for m in (d.beta, bp, bm)])
    scale = np.where(scale > 0, scale, 1.0)
    rp, rm = _rank(bp, scale), _rank(bm, scale)
    r_cols = _rank(np.concatenate([bp, bm], axis=-1), scale)
    r_rows = _rank(np.concatenate([bp, bm], axis=-2), scale)
    mu11, det_mu = d.mu11, d.det_mu
    return AdmissibilityReport(
        mu11=mu11,
        det_mu=det_mu,
        mu11_ok=mu11 >= -tol,
        det_ok=det_mu >= -tol,
        range_ok=r_cols == rp + rm,
        span_ok=r_rows == rp + rm,
    )


@dataclass(frozen=True)
class AdmissibilitySweep:
    samples: BoundarySamples
    decomposition: BetaDecomposition
    report: AdmissibilityReport
    on_circle: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.report.ok))

    def summary(self) -> dict:
        r = self.report
        degenerate_det = np.abs(r.det_mu[self.on_circle | (self.samples.arc_class == ArcClass.CHARACTERISTIC)])
        return {
            "n_samples": int(len(self.samples)),
            "min_mu11": float(np.min(r.mu11)),
            "min_det_mu": float(np.min(r.det_mu)),
            "max_abs_det_mu_circle_and_characteristic": float(np.max(degenerate_det, initial=0.0)),
            "range_failures": int(np.sum(~r.range_ok)),
            "span_failures": int(np.sum(~r.span_ok)),
            "mu11_failures": int(np.sum(~r.mu11_ok)),
            "det_failures": int(np.sum(~r.det_ok)),
            "pass": self.passed,
        }

    def records(self) -> list[dict]:
        s, r = self.samples, self.report
        return [
            {
                "theta": float(s.theta[k]),
                "x": float(s.x[k]),
                "y": float(s.y[k]),
                "class": ArcClass(int(s.arc_class[k])).label,
                "mu11": float(r.mu11[k]),
                "det_mu": float(r.det_mu[k]),
                "range_ok": bool(r.range_ok[k]),
                "span_ok": bool(r.span_ok[k]),
            }
            for k in range(len(s))
        ]

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump({"summary": self.summary(), "samples": self.records()}, fh, indent=1)


def circle_mask(samples: BoundarySamples, spec: DomainSpec, tol: float = 1e-12):
    """Samples on the unit circle proper (cap profile vanishes there)."""
    return (samples.piece == Piece.CAP) & (spec.h(samples.x) == 0.0) & (np.abs(np.hypot(samples.x, samples.y) - 1.0) <= tol)


def admissibility_sweep(spec: DomainSpec, n: int = 2048, fillet_split: str = "outflow") -> AdmissibilitySweep:
    s = sample_boundary(spec, n)
    d = decompose((s.x, s.y), (s.n1, s.n2), s.arc_class, fillet_split=fillet_split)
    return AdmissibilitySweep(s, d, check_admissibility(d), circle_mask(s, spec))


def corner_report(spec: DomainSpec) -> dict:
    """Regularity of the corner where the polar lines meet.

    Without a fillet (delta = 0) the boundary turns through a right angle at
    (-sqrt2, 0) and det mu* computed from either polar line vanishes there.
    """
    x, y = -math.sqrt(2.0), 0.0
    s = 1.0 / math.sqrt(2.0)
    dets = []
    for n in ((-s, s), (-s, -s)):
        d = decompose((x, y), n, ArcClass.CHARACTERISTIC)
        dets.append(float(d.det_mu))
    return {
        "smoothed": spec.delta > 0,
        "normal_jump_degrees": 0.0 if spec.delta > 0 else 90.0,
        "det_mu_one_sided": dets,
        "location": [x, y],
    }
