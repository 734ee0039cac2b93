"""Least-squares discretization of L U = F on the triangulated domain.

Continuous piecewise-linear U, one-point (centroid) quadrature per triangle,
and boundary conditions imposed weakly through a penalty at the mid-angle
sample of each boundary edge::

    J(U) = sum_T area_T |A1 U_x + A2 U_y + B U - F|^2 (centroid)
         + sum_e (lambda / h_e) w_e |r_e . U(mid_e) - g_e|^2

with h_e = w_e the edge length.  J = |R U - d|^2 for a sparse matrix R, and
the normal equations R^T R U = R^T d are solved by a Jacobi-preconditioned
Krylov method.  Unknowns are ordered [u1 at all vertices, u2 at all vertices].
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .boundary import beta, boundary_condition_rows
from .coefficients import CoefficientSet, SmoothField
from .errors import NonConvergenceError
from .geometry import DomainSpec, Mesh, generate_mesh
from .operator import assemble_matrices, check_gbound, operator_action, q_closed_form, symmetric_source

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 10.0
DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class BoundaryData:
    """Right sides g of the boundary rows, as a function of the sample points.

    ``g(x, y, rows)`` returns one value per sample; ``None`` means homogeneous.
    """

    g: Callable | None = None

    @classmethod
    def from_field(cls, U: SmoothField) -> "BoundaryData":
        def g(x, y, rows):
            u = U.value(x, y)
            return rows[:, 0] * u[0] + rows[:, 1] * u[1]

        return cls(g)

    def evaluate(self, x, y, rows):
        if self.g is None:
            return np.zeros(len(x))
        return np.asarray(self.g(x, y, rows), dtype=float)


@dataclass
class DiscreteProblem:
    mesh: Mesh
    R: sp.csr_matrix
    d: np.ndarray
    matrix: sp.csr_matrix  # R^T R, symmetric
    rhs: np.ndarray  # R^T d
    penalty: float
    n_boundary_rows: int
    gbound_warnings: list = field(default_factory=list)

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[0]

    def objective(self, u: np.ndarray) -> float:
        r = self.R @ u - self.d
        return float(r @ r)


@dataclass(frozen=True)
class SolutionField:
    mesh: Mesh
    u1: np.ndarray
    u2: np.ndarray

    @classmethod
    def from_vector(cls, mesh: Mesh, u: np.ndarray) -> "SolutionField":
        nv = mesh.n_vertices
        return cls(mesh, u[:nv].copy(), u[nv:].copy())

    @classmethod
    def interpolate(cls, mesh: Mesh, U: SmoothField) -> "SolutionField":
        v = U.value(mesh.vertices[:, 0], mesh.vertices[:, 1])
        return cls(mesh, np.asarray(v[0], float).copy(), np.asarray(v[1], float).copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.u1, self.u2])

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "u1", "u2"])
            for (x, y), a, b in zip(self.mesh.vertices, self.u1, self.u2):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(a)), repr(float(b))])


@dataclass(frozen=True)
class EnergyReport:
    volume_term: float
    boundary_term: float
    source_term: float

    @property
    def defect(self) -> float:
        return abs(self.volume_term + self.boundary_term - self.source_term)

    def as_dict(self) -> dict:
        return {
            "volume_term": self.volume_term,
            "boundary_term": self.boundary_term,
            "source_term": self.source_term,
            "defect": self.defect,
        }


@dataclass
class SolveResult:
    solution: SolutionField
    residual_history: list
    l2_functional: float
    energy_report: EnergyReport | None
    iterations: int


def _p1_geometry(mesh: Mesh):
    """Centroids, areas and gradients of the three barycentric basis functions."""
    p = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    x, y = p[..., 0], p[..., 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    # grad lambda_k = (y_{k+1} - y_{k+2}, x_{k+2} - x_{k+1}) / (2 area)
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / area2[:, None]
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / area2[:, None]
    centroid = p.mean(axis=1)
    return centroid, 0.5 * area2, gx, gy


def assemble(
    mesh: Mesh,
    c: CoefficientSet,
    bc_data: BoundaryData | None = None,
    source: Callable | None = None,
    penalty: float = DEFAULT_LAMBDA,
    fillet_split: str = "outflow",
) -> DiscreteProblem:
    """Assemble the least-squares system.

    ``source(x, y)`` gives the right side of the symmetric system with shape
    (2, ...); by default it is T (f1, f2) from the coefficient set.  Failure of
    the coefficient condition at a quadrature point is recorded as a warning,
    not raised.
    """
    bc_data = bc_data or BoundaryData()
    nv, nt = mesh.n_vertices, mesh.n_triangles
    centroid, area, gx, gy = _p1_geometry(mesh)
    cx, cy = centroid[:, 0], centroid[:, 1]

    warnings = []
    rep = check_gbound((cx, cy), c)
    if not rep.all_positive_definite:
        k = int(np.flatnonzero(~rep.q_positive_definite)[0])
        warnings.append({"check": "Q positive definite", "count": int(np.sum(~rep.q_positive_definite)), "location": [float(cx[k]), float(cy[k])]})
        log.warning("Q is not positive definite at %d quadrature points", warnings[-1]["count"])

    m = assemble_matrices((cx, cy), c)
    F = source(cx, cy) if source is not None else symmetric_source((cx, cy), c)
    sw = np.sqrt(area)

    # residual component i depends on u_m at vertex k through
    # A1[i,m] gx_k + A2[i,m] gy_k + B[i,m] / 3
    rows, cols, vals = [], [], []
    tri = mesh.triangles
    for i in range(2):
        for mm in range(2):
            coef = m.A1[:, i, mm, None] * gx + m.A2[:, i, mm, None] * gy + m.B[:, i, mm, None] / 3.0
            rows.append(np.repeat(2 * np.arange(nt) + i, 3))
            cols.append((tri + mm * nv).ravel())
            vals.append((coef * sw[:, None]).ravel())
    d_int = (F * sw[None, :]).T.ravel()  # row 2t + i

    b = mesh.boundary
    r, active = boundary_condition_rows(b.arc_class, (b.n1, b.n2), b.y, fillet_split=fillet_split)
    ids = np.flatnonzero(active)
    rb = r[ids]
    g = bc_data.evaluate(b.x[ids], b.y[ids], rb)
    # lambda / h_e * w_e with h_e = w_e
    bw = np.sqrt(np.full(ids.size, penalty))
    e = mesh.boundary_edges[ids]
    brow = 2 * nt + np.arange(ids.size)
    for mm in range(2):
        for end in range(2):
            rows.append(brow)
            cols.append(e[:, end] + mm * nv)
            vals.append(0.5 * rb[:, mm] * bw)
    d_bnd = g * bw

    nrows = 2 * nt + ids.size
    R = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nrows, 2 * nv))
    d = np.concatenate([d_int, d_bnd])
    M = (R.T @ R).tocsr()
    M = ((M + M.T) * 0.5).tocsr()
    M.sort_indices()
    return DiscreteProblem(mesh, R, d, M, R.T @ d, penalty, int(ids.size), warnings)


def default_max_iter(n: int) -> int:
    return int(500 * math.sqrt(n))


def conjugate_residual(A, b, tol=DEFAULT_TOL, max_iter=None, x0=None):
    """Jacobi-preconditioned conjugate residual method for SPD ``A``.

    Works on the symmetrically scaled system D^-1/2 A D^-1/2; its residual
    norm is minimized over a growing Krylov space, so in exact arithmetic the
    recorded relative residuals never increase.  Returns ``(x, history)``.

    Raises
    ------
    NonConvergenceError
        After ``max_iter`` iterations without reaching ``tol``.
    """
    n = A.shape[0]
    max_iter = default_max_iter(n) if max_iter is None else max_iter
    diag = A.diagonal()
    s = 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0))
    As = sp.diags(s) @ A @ sp.diags(s)
    bs = s * b
    bnorm = np.linalg.norm(bs)
    if bnorm == 0.0:
        return np.zeros(n), [0.0]
    y = np.zeros(n) if x0 is None else x0 / s
    r = bs - As @ y
    p = r.copy()
    Ar = As @ r
    Ap = Ar.copy()
    rAr = r @ Ar
    history = [np.linalg.norm(r) / bnorm]
    for _ in range(max_iter):
        if history[-1] <= tol:
            break
        a = rAr / (Ap @ Ap)
        y += a * p
        r -= a * Ap
        Ar = As @ r
        rAr_new = r @ Ar
        beta_ = rAr_new / rAr
        rAr = rAr_new
        p = r + beta_ * p
        Ap = Ar + beta_ * Ap
        history.append(np.linalg.norm(r) / bnorm)
    else:
        if history[-1] > tol:
            raise NonConvergenceError(f"no convergence to {tol:g} in {max_iter} iterations (reached {history[-1]:.3e})", history)
    return s * y, history


def solve(problem: DiscreteProblem, tol: float = DEFAULT_TOL, max_iter: int | None = None, c: CoefficientSet | None = None) -> SolveResult:
    """Solve the normal equations; optionally attach the energy report for ``c``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    u, history = conjugate_residual(problem.matrix, problem.rhs, tol=tol, max_iter=max_iter)
    sol = SolutionField.from_vector(problem.mesh, u)
    energy = energy_identity(sol, c, problem.mesh) if c is not None else None
    return SolveResult(sol, history, problem.objective(u), energy, len(history) - 1)


def energy_identity(U, c: CoefficientSet, mesh: Mesh) -> EnergyReport:
    """Terms of  int U.LU = int U.QU + 1/2 oint U.beta U  on the mesh polygon.

    Interior integrals use the centroid rule, the boundary integral the
    midpoint rule on each polygon edge with the edge's outward normal, so for
    smooth U the defect is pure quadrature error, O(h^2).
    """
    centroid, area, gx, gy = _p1_geometry(mesh)
    cx, cy = centroid[:, 0], centroid[:, 1]
    mid, length, normal = mesh.edge_geometry()
    if isinstance(U, SmoothField):
        u = U.value(cx, cy)
        ux, uy = U.dx(cx, cy), U.dy(cx, cy)
        ub = U.value(mid[:, 0], mid[:, 1])
    else:
        vals = np.stack([U.u1, U.u2])  # (2, nv)
        tv = vals[:, mesh.triangles]  # (2, nt, 3)
        u = tv.mean(axis=2)
        ux = np.einsum("itk,tk->it", tv, gx)
        uy = np.einsum("itk,tk->it", tv, gy)
        e = mesh.boundary_edges
        ub = 0.5 * (vals[:, e[:, 0]] + vals[:, e[:, 1]])
    u, ux, uy, ub = (np.broadcast_to(np.asarray(a, float), (2,) + np.shape(a)[1:]) for a in (u, ux, uy, ub))
    Lu = operator_action(u, ux, uy, (cx, cy), c)
    q = q_closed_form((cx, cy), c)
    uqu = q.q11 * u[0] ** 2 + 2.0 * q.q12 * u[0] * u[1] + q.q22 * u[1] ** 2
    bm = beta((mid[:, 0], mid[:, 1]), (normal[:, 0], normal[:, 1]))
    ubu = bm[:, 0, 0] * ub[0] ** 2 + 2.0 * bm[:, 0, 1] * ub[0] * ub[1] + bm[:, 1, 1] * ub[1] ** 2
    return EnergyReport(
        volume_term=float(np.sum(area * uqu)),
        boundary_term=float(0.5 * np.sum(length * ubu)),
        source_term=float(np.sum(area * np.sum(u * Lu, axis=0))),
    )


def l2_norm(U: SolutionField, mesh: Mesh, exact: SmoothField | None = None) -> float:
    """L2 norm of U (or of U - exact) by the edge-midpoint rule, exact for quadratics."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    vals = np.stack([U.u1, U.u2])[:, mesh.triangles]  # (2, nt, 3)
    total = np.zeros(mesh.n_triangles)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        pm = 0.5 * (p[:, a] + p[:, b])
        um = 0.5 * (vals[:, :, a] + vals[:, :, b])
        if exact is not None:
            um = um - np.asarray(exact.value(pm[:, 0], pm[:, 1]), float)
        total += np.sum(um**2, axis=0)
    return float(math.sqrt(np.sum(area * total / 3.0)))


def source_l2_norm(source: Callable, mesh: Mesh) -> float:
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    total = np.zeros(mesh.n_triangles)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        pm = 0.5 * (p[:, a] + p[:, b])
        f = np.broadcast_to(np.asarray(source(pm[:, 0], pm[:, 1]), float), (2, pm.shape[0]))
        total += np.sum(f**2, axis=0)
    return float(math.sqrt(np.sum(area * total / 3.0)))


def manufactured_source(U: SmoothField, c: CoefficientSet) -> Callable:
    """F = L U* as a callable for :func:`assemble`."""
    return lambda x, y: operator_action(U.value(x, y), U.dx(x, y), U.dy(x, y), (x, y), c)


@dataclass(frozen=True)
class ConvergenceRow:
    n_theta: int
    n_r: int
    h: float
    l2_error: float
    functional: float
    energy_defect: float
    stability_ratio: float
    iterations: int

    def as_dict(self) -> dict:
        return self.__dict__.copy()


def radial_levels(n_theta: int) -> int:
    return max(4, n_theta // 4)


def convergence_study(
    spec: DomainSpec,
    c: CoefficientSet,
    U: SmoothField,
    levels: int = 3,
    n_theta0: int = 32,
    penalty: float = DEFAULT_LAMBDA,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    fillet_split: str = "outflow",
) -> list[ConvergenceRow]:
    """Manufactured-solution refinement study at n_theta = n_theta0 * 2^k.

    Data: F = L U*, g = r . U* on every constrained boundary sample.
    stability_ratio is |U_h| / |F| in L2.
    """
    if levels < 3:
        raise ValueError("a refinement study needs at least 3 levels")
    source = manufactured_source(U, c)
    rows = []
    for k in range(levels):
        n_theta = n_theta0 * 2**k
        n_r = radial_levels(n_theta)
        mesh = generate_mesh(spec, n_theta, n_r)
        prob = assemble(mesh, c, BoundaryData.from_field(U), source=source, penalty=penalty, fillet_split=fillet_split)
        res = solve(prob, tol=tol, max_iter=max_iter, c=c)
        fnorm = source_l2_norm(source, mesh)
        unorm = l2_norm(res.solution, mesh)
        rows.append(
            ConvergenceRow(
                n_theta=n_theta,
                n_r=n_r,
                h=mesh.h,
                l2_error=l2_norm(res.solution, mesh, U),
                functional=res.l2_functional,
                energy_defect=res.energy_report.defect,
                stability_ratio=unorm / fnorm if fnorm > 0 else 0.0,
                iterations=res.iterations,
            )
        )
        log.info("n_theta=%d: l2 error %.3e after %d iterations", n_theta, rows[-1].l2_error, res.iterations)
    return rows


def write_convergence_csv(rows: list[ConvergenceRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "l2_error", "functional", "energy_defect", "stability_ratio"])
        for r in rows:
            w.writerow([repr(r.h), repr(r.l2_error), repr(r.functional), repr(r.energy_defect), repr(r.stability_ratio)])


def stability_study(spec: DomainSpec, c: CoefficientSet, levels: int = 3, n_theta0: int = 32, penalty: float = DEFAULT_LAMBDA, tol: float = DEFAULT_TOL):
    """|U_h| / |F| for the coefficient set's own source with homogeneous boundary data."""
    out = []
    for k in range(levels):
        n_theta = n_theta0 * 2**k
        mesh = generate_mesh(spec, n_theta, radial_levels(n_theta))
        prob = assemble(mesh, c, penalty=penalty)
        res = solve(prob, tol=tol)
        src = lambda x, y: symmetric_source((x, y), c)  # noqa: E731
        out.append((n_theta, l2_norm(res.solution, mesh) / source_l2_norm(src, mesh), res))
    return out


__all__ = [
    "BoundaryData",
    "DiscreteProblem",
    "EnergyReport",
    "SolutionField",
    "SolveResult",
    "assemble",
    "conjugate_residual",
    "convergence_study",
    "energy_identity",
    "l2_norm",
    "solve",
]
