"""Executable form of the existence theorem's hypotheses.

Each check is sampled: random interior points of the domain, equally spaced
boundary samples, and a handful of targeted points (crests, corner).  Every
record names the mathematical statement it tests in ``anchor``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .boundary import (
    FILLET_SPLITS,
    admissibility_sweep,
    beta,
    beta_alternate,
    corner_report,
)
from .coefficients import CoefficientSet
from .errors import CoefficientError
from .geometry import SQRT2, ArcClass, DomainSpec, boundary_radius, contains
from .operator import char_form, check_gbound, q_closed_form

IDENTITY_TOL = 1e-12
SWEEP_TOL = 1e-10


@dataclass
class CheckRecord:
    name: str
    anchor: str
    passed: bool
    worst_value: float
    location: list | None = None
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[CheckRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> CheckRecord | None:
        return next((c for c in self.checks if not c.passed), None)

    def get(self, name: str) -> CheckRecord:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        fail = self.first_failure
        return {
            "overall": "pass" if self.passed else "fail",
            "first_failure": fail.name if fail else None,
            "checks": [asdict(c) for c in self.checks],
        }


def interior_samples(spec: DomainSpec, n: int, rng: np.random.Generator):
    """n points uniformly distributed in the domain (rejection from its bounding box)."""
    xs, ys = [], []
    count = 0
    while count < n:
        x = rng.uniform(-SQRT2, 1.0, size=2 * n)
        y = rng.uniform(-1.0, 1.0, size=2 * n)
        keep = contains(spec, x, y, tol=0.0)
        xs.append(x[keep])
        ys.append(y[keep])
        count += int(keep.sum())
    return np.concatenate(xs)[:n], np.concatenate(ys)[:n]


def _loc(x, y, k):
    return [float(np.ravel(x)[k]), float(np.ravel(y)[k])]


def verify(
    spec: DomainSpec,
    coeffs: CoefficientSet,
    boundary_samples: int = 2048,
    interior_samples_count: int = 4096,
    seed: int = 0,
    fillet_split: str = "outflow",
) -> tuple[VerificationReport, object]:
    """Run every check; returns the report and the admissibility sweep."""
    if fillet_split not in FILLET_SPLITS:
        raise ValueError(f"fillet_split must be one of {FILLET_SPLITS}")
    rng = np.random.default_rng(seed)
    report = VerificationReport()
    add = report.checks.append

    sweep = admissibility_sweep(spec, boundary_samples, fillet_split=fillet_split)
    s = sweep.samples
    xi, yi = interior_samples(spec, interior_samples_count, rng)
    # the closed domain: interior points together with the boundary samples
    X = np.concatenate([xi, s.x])
    Y = np.concatenate([yi, s.y])

    try:
        coeffs.evaluate(X, Y)
        add(CheckRecord("coefficients finite", "Gamma, gamma1, F bounded on the closed domain", True, 0.0))
    except CoefficientError as exc:
        add(CheckRecord("coefficients finite", "Gamma, gamma1, F bounded on the closed domain", False, float("nan"), detail=str(exc)))
        return report, sweep

    q = q_closed_form((X, Y), coeffs)
    tr = q.q11 + q.q22
    lam_min = 0.5 * (tr - np.sqrt((q.q11 - q.q22) ** 2 + 4.0 * q.q12**2))
    k = int(np.argmin(lam_min))
    add(
        CheckRecord(
            "Q positive definite",
            "Q = B* - (A1_x + A2_y)/2 > 0",
            bool(np.all(q.positive_definite)),
            float(lam_min[k]),
            _loc(X, Y, k),
            "worst_value is the smallest eigenvalue of Q",
        )
    )

    g = check_gbound((X, Y), coeffs)
    k = int(np.argmin(np.where(g.gamma1_positive, g.margin, -np.inf)))
    add(
        CheckRecord(
            "coefficient bound",
            "Gamma1 > 0 and |gamma1| >= [xy Gamma1 + (y^2-1) Gamma2]^2 / (4 |Gamma1 (1-y^2)|)",
            g.all_passed,
            float(g.margin[k]),
            _loc(X, Y, k),
            "worst_value is the smallest margin |gamma1| - bound",
        )
    )

    # y^2 is largest on the boundary; sample it densely
    t = np.linspace(0.0, 2.0 * math.pi, 8 * boundary_samples, endpoint=False)
    rho = boundary_radius(t, spec)
    y2 = (rho * np.sin(t)) ** 2
    k = int(np.argmax(y2))
    add(CheckRecord("y^2 bounded below 1", "sup y^2 < 1 on the closed domain", bool(y2[k] < 1.0), float(y2[k]), [float(rho[k] * math.cos(t[k])), float(rho[k] * math.sin(t[k]))]))

    phi = char_form((s.x, s.y), (s.t1, s.t2))
    char = s.arc_class == ArcClass.CHARACTERISTIC
    worst = np.where(char, np.abs(phi), 0.0)
    k = int(np.argmax(worst))
    add(CheckRecord("polar lines characteristic", "alpha dy = 0 along both polar lines", bool(worst[k] <= IDENTITY_TOL), float(worst[k]), _loc(s.x, s.y, k)))

    circ = sweep.on_circle
    worst = np.where(circ, np.abs(phi), 0.0)
    k = int(np.argmax(worst))
    add(CheckRecord("circle arcs tangent to characteristics", "alpha dy = -(x dx + y dy)^2 = 0 on the unit circle", bool(worst[k] <= SWEEP_TOL), float(worst[k]), _loc(s.x, s.y, k)))

    # Phi <= 0 in the closed disc: boundary samples there, plus random points and directions
    r = np.sqrt(rng.uniform(0.0, 1.0, interior_samples_count))
    a = rng.uniform(0.0, 2.0 * math.pi, interior_samples_count)
    b = rng.uniform(0.0, 2.0 * math.pi, interior_samples_count)
    in_disc = s.x**2 + s.y**2 <= 1.0
    px = np.concatenate([r * np.cos(a), s.x[in_disc]])
    py = np.concatenate([r * np.sin(a), s.y[in_disc]])
    vals = np.concatenate([char_form((r * np.cos(a), r * np.sin(a)), (np.cos(b), np.sin(b))), phi[in_disc]])
    k = int(np.argmax(vals))
    add(CheckRecord("characteristic form nonpositive in disc", "alpha dy <= -(x dx + y dy)^2 <= 0 on the closed disc", bool(vals[k] <= IDENTITY_TOL), float(vals[k]), _loc(px, py, k)))

    rep = sweep.report
    k = int(np.argmin(rep.mu11))
    add(CheckRecord("mu* (1,1) entry nonnegative", "mu*_11 >= 0", bool(np.all(rep.mu11_ok)), float(rep.mu11[k]), _loc(s.x, s.y, k)))
    k = int(np.argmin(rep.det_mu))
    add(CheckRecord("det mu* nonnegative", "|mu*| >= 0", bool(np.all(rep.det_ok)), float(rep.det_mu[k]), _loc(s.x, s.y, k)))
    degenerate_det = np.where(circ | char, np.abs(rep.det_mu), 0.0)
    k = int(np.argmax(degenerate_det))
    add(CheckRecord("det mu* vanishes on circle and lines", "|mu*| = 0 where alpha = 0", bool(degenerate_det[k] <= SWEEP_TOL), float(degenerate_det[k]), _loc(s.x, s.y, k)))
    for name, anchor, ok in (
        ("range condition", "range(beta_+) ∩ range(beta_-) = {0}", rep.range_ok),
        ("span condition", "ker(beta_+) + ker(beta_-) = R^2", rep.span_ok),
    ):
        bad = np.flatnonzero(~ok)
        add(
            CheckRecord(
                name,
                anchor,
                bad.size == 0,
                float(bad.size),
                _loc(s.x, s.y, int(bad[0])) if bad.size else None,
                "worst_value is the number of failing samples",
            )
        )

    # singularity removal: the sweep's normals plus normals rotated onto n1 -> 0
    nx = np.concatenate([s.n1, np.zeros(4), np.array([1e-8, -1e-8, 1e-12, -1e-12])])
    ny = np.concatenate([s.n2, np.array([1.0, -1.0, 1.0, -1.0]), np.sqrt(1.0 - np.array([1e-16, 1e-16, 1e-24, 1e-24]))])
    bx = np.concatenate([s.x, np.zeros(4), np.full(4, 0.3)])
    by = np.concatenate([s.y, np.full(4, 0.9), np.full(4, -0.8)])
    diff = np.max(np.abs(beta((bx, by), (nx, ny)) - beta_alternate((bx, by), (nx, ny))), axis=(-2, -1))
    k = int(np.argmax(diff))
    add(CheckRecord("singularity removal", "beta = n_j A^j equals the alternate form for all n1", bool(diff[k] <= IDENTITY_TOL), float(diff[k]), _loc(bx, by, k)))

    corner = corner_report(spec)
    add(
        CheckRecord(
            "corner smoothing",
            "C^2 smoothing curve at the intersection of the polar lines",
            corner["smoothed"],
            0.0 if corner["smoothed"] else min(abs(v) for v in corner["det_mu_one_sided"]),
            corner["location"],
            "" if corner["smoothed"] else "sharp corner: normal jumps by 90 degrees and det mu* vanishes there",
        )
    )
    return report, sweep
