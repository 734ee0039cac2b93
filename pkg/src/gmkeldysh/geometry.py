"""The mixed-type domain and its boundary.

The domain is the unit disc, flattened near the poles by the curves
``y = +-sqrt(1 - x^2 - h(x))``, closed on the left by the two lines tangent to
the unit circle at (-sqrt2/2, +-sqrt2/2) and smoothed at their intersection
(-sqrt2, 0) by a quartic fillet.  It is star-shaped about the origin, so the
boundary is parametrized by polar angle: ``r = rho(theta)``.

Each boundary piece is the zero set of a function whose gradient points
outward, which gives normals without differentiating ``rho``.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import integrate, optimize

from .errors import (
    CapSolveError,
    ClassificationError,
    MeshDomainError,
    MeshQualityError,
    ParameterError,
)
from .operator import Point

SQRT2 = math.sqrt(2.0)
TANGENCY_X = -SQRT2 / 2.0
CORNER = Point(-SQRT2, 0.0)
EPS_MAX = 0.3
DELTA_MAX = 0.2
CLASSIFY_TOL = 1e-9
TWO_PI = 2.0 * math.pi


class ArcClass(enum.IntEnum):
    TAU1 = 1
    TAU2 = 2
    CHARACTERISTIC = 3
    CORNER_FILLET = 4
    DEGENERATE = 5

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    ArcClass.TAU1: "Tau1",
    ArcClass.TAU2: "Tau2",
    ArcClass.CHARACTERISTIC: "Characteristic",
    ArcClass.CORNER_FILLET: "CornerFillet",
    ArcClass.DEGENERATE: "Degenerate",
}


class Piece(enum.IntEnum):
    CAP = 0  # caps and circle arcs
    UPPER_LINE = 1  # y = x + sqrt2
    FILLET = 2
    LOWER_LINE = 3  # y = -x - sqrt2


def default_cap(x, eps, halfwidth=SQRT2 / 2.0):
    """h(x) = eps (1 - (x/w)^2)^3 on |x| <= w, zero outside; w = sqrt2/2 by default.

    For the default width this is eps (1 - 2x^2)^3.  It vanishes with its first
    two derivatives at x = +-w.
    """
    x = np.asarray(x, dtype=float)
    s = 1.0 - (x / halfwidth) ** 2
    return np.where(s > 0.0, eps * np.clip(s, 0.0, None) ** 3, 0.0)


def default_cap_derivative(x, eps, halfwidth=SQRT2 / 2.0, order=1):
    x = np.asarray(x, dtype=float)
    w2 = halfwidth**2
    s = np.clip(1.0 - x**2 / w2, 0.0, None)
    if order == 1:
        d = eps * 3.0 * s**2 * (-2.0 * x / w2)
    elif order == 2:
        d = eps * (24.0 * x**2 / w2**2 * s - 6.0 / w2 * s**2)
    else:
        raise ValueError("order must be 1 or 2")
    return np.where(s > 0.0, d, 0.0)


@dataclass(frozen=True)
class Fillet:
    """x = g(y) = a + b y^2 + c y^4 on |y| <= delta."""

    delta: float
    a: float
    b: float
    c: float

    def g(self, y):
        y2 = np.asarray(y, dtype=float) ** 2
        return self.a + self.b * y2 + self.c * y2**2

    def dg(self, y):
        y = np.asarray(y, dtype=float)
        return 2.0 * self.b * y + 4.0 * self.c * y**3

    def d2g(self, y):
        y = np.asarray(y, dtype=float)
        return 2.0 * self.b + 12.0 * self.c * y**2


def corner_fillet(delta: float) -> Fillet:
    """Even quartic meeting x = y - sqrt2 and x = -y - sqrt2 at y = +-delta to second order."""
    if not 0.0 < delta <= DELTA_MAX:
        raise ParameterError(f"fillet half-width must lie in (0, {DELTA_MAX}], got {delta}")
    return Fillet(delta=delta, a=0.375 * delta - SQRT2, b=0.75 / delta, c=-1.0 / (8.0 * delta**3))


@dataclass(frozen=True)
class DomainSpec:
    """Domain parameters.

    ``delta == 0`` leaves the sharp corner in place; every other operation
    accepts it, but the verifier flags it.
    """

    epsilon: float = 0.05
    delta: float = 0.05
    cap_halfwidth: float = SQRT2 / 2.0

    def __post_init__(self):
        if not 0.0 < self.epsilon <= EPS_MAX:
            raise ParameterError(f"cap amplitude must lie in (0, {EPS_MAX}], got {self.epsilon}")
        if not 0.0 <= self.delta <= DELTA_MAX:
            raise ParameterError(f"fillet half-width must lie in [0, {DELTA_MAX}], got {self.delta}")
        if not 0.0 < self.cap_halfwidth <= SQRT2 / 2.0 + 1e-15:
            raise ParameterError("cap support must lie inside |x| <= sqrt2/2 so that h vanishes at the tangency points")

    # cap profile
    def h(self, x):
        return default_cap(x, self.epsilon, self.cap_halfwidth)

    def dh(self, x):
        return default_cap_derivative(x, self.epsilon, self.cap_halfwidth, 1)

    def d2h(self, x):
        return default_cap_derivative(x, self.epsilon, self.cap_halfwidth, 2)

    @property
    def fillet(self) -> Fillet | None:
        return corner_fillet(self.delta) if self.delta > 0 else None

    @property
    def fillet_angle(self) -> float:
        """Half the polar angle subtended by the fillet."""
        return math.atan2(self.delta, SQRT2 - self.delta)

    def breakpoints(self) -> list[float]:
        """Polar angles in [0, 2pi) where the boundary changes piece."""
        a = math.acos(self.cap_halfwidth)
        td = self.fillet_angle
        raw = [a, math.pi - a, 0.75 * math.pi, math.pi - td, math.pi + td, 1.25 * math.pi, math.pi + a, TWO_PI - a]
        out: list[float] = []
        for t in sorted(raw):
            if not out or t - out[-1] > 1e-12:
                out.append(t)
        return out


def _wrap(theta):
    return np.mod(np.asarray(theta, dtype=float), TWO_PI)


def boundary_piece(theta, spec: DomainSpec):
    t = _wrap(theta)
    td = spec.fillet_angle
    piece = np.full(t.shape, int(Piece.CAP))
    piece = np.where((t >= 0.75 * math.pi) & (t <= math.pi - td), int(Piece.UPPER_LINE), piece)
    piece = np.where((t >= math.pi + td) & (t <= 1.25 * math.pi), int(Piece.LOWER_LINE), piece)
    if spec.delta > 0:
        piece = np.where((t > math.pi - td) & (t < math.pi + td), int(Piece.FILLET), piece)
    return piece


def _cap_radius(c, spec: DomainSpec, max_iter=100, tol=1e-15):
    rho = np.ones_like(c)
    for _ in range(max_iter):
        new = np.sqrt(1.0 - spec.h(rho * c))
        if np.max(np.abs(new - rho), initial=0.0) <= tol:
            return new
        rho = new
    raise CapSolveError(f"cap radius fixed-point iteration did not converge in {max_iter} iterations")


def _fillet_radius(t, fillet: Fillet):
    c, s = np.cos(t), np.sin(t)
    out = np.empty_like(t)
    for k in range(t.size):
        fun = lambda r: fillet.g(r * s.flat[k]) - r * c.flat[k]  # noqa: E731
        out.flat[k] = optimize.brentq(fun, 1.0, 1.5, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return out


def boundary_radius(theta, spec: DomainSpec):
    """rho(theta): distance from the origin to the boundary along the ray at angle theta."""
    t = np.atleast_1d(_wrap(theta))
    piece = boundary_piece(t, spec)
    rho = np.empty_like(t)
    m = piece == Piece.CAP
    if np.any(m):
        rho[m] = _cap_radius(np.cos(t[m]), spec)
    m = piece == Piece.UPPER_LINE
    rho[m] = SQRT2 / (np.sin(t[m]) - np.cos(t[m]))
    m = piece == Piece.LOWER_LINE
    rho[m] = -SQRT2 / (np.sin(t[m]) + np.cos(t[m]))
    m = piece == Piece.FILLET
    if np.any(m):
        rho[m] = _fillet_radius(t[m], spec.fillet)
    return rho if np.ndim(theta) else float(rho[0])


def _outward_gradient(x, y, piece, spec: DomainSpec):
    gx = np.empty_like(x)
    gy = np.empty_like(x)
    m = piece == Piece.CAP
    gx[m] = 2.0 * x[m] + spec.dh(x[m])
    gy[m] = 2.0 * y[m]
    m = piece == Piece.UPPER_LINE
    gx[m], gy[m] = -1.0, 1.0
    m = piece == Piece.LOWER_LINE
    gx[m], gy[m] = -1.0, -1.0
    m = piece == Piece.FILLET
    if np.any(m):
        gx[m] = -1.0
        gy[m] = spec.fillet.dg(y[m])
    norm = np.hypot(gx, gy)
    return gx / norm, gy / norm


@dataclass(frozen=True)
class BoundarySample:
    point: Point
    normal: tuple[float, float]
    tangent: tuple[float, float]
    arc_class: ArcClass
    arclength_weight: float
    theta: float = float("nan")


@dataclass(frozen=True)
class BoundarySamples:
    """Struct-of-arrays batch of boundary samples."""

    theta: np.ndarray
    x: np.ndarray
    y: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    arc_class: np.ndarray
    weight: np.ndarray
    piece: np.ndarray

    @property
    def t1(self):
        return -self.n2

    @property
    def t2(self):
        return self.n1

    def __len__(self):
        return self.theta.size

    def __getitem__(self, k) -> BoundarySample:
        return BoundarySample(
            point=Point(float(self.x[k]), float(self.y[k])),
            normal=(float(self.n1[k]), float(self.n2[k])),
            tangent=(float(-self.n2[k]), float(self.n1[k])),
            arc_class=ArcClass(int(self.arc_class[k])),
            arclength_weight=float(self.weight[k]),
            theta=float(self.theta[k]),
        )

    def __iter__(self) -> Iterator[BoundarySample]:
        return (self[k] for k in range(len(self)))

    def select(self, mask) -> "BoundarySamples":
        return BoundarySamples(**{f: getattr(self, f)[mask] for f in self.__dataclass_fields__})


def _class_from(piece, n1, tol):
    cls = np.where(n1 > tol, int(ArcClass.TAU1), np.where(n1 < -tol, int(ArcClass.TAU2), int(ArcClass.DEGENERATE)))
    cls = np.where((piece == Piece.UPPER_LINE) | (piece == Piece.LOWER_LINE), int(ArcClass.CHARACTERISTIC), cls)
    return np.where(piece == Piece.FILLET, int(ArcClass.CORNER_FILLET), cls)


def boundary_samples(theta, spec: DomainSpec, dtheta=None, tol: float = CLASSIFY_TOL) -> BoundarySamples:
    """Boundary points, outward normals and arc classes at the given angles.

    ``weight`` is ``|dP/dtheta| * dtheta``; pass ``dtheta=None`` for unit spacing.
    At the sharp corner (delta == 0, theta == pi) the normal is the bisector (-1, 0).
    """
    t = np.atleast_1d(_wrap(theta)).astype(float)
    rho = np.atleast_1d(boundary_radius(t, spec))
    c, s = np.cos(t), np.sin(t)
    x, y = rho * c, rho * s
    piece = boundary_piece(t, spec)
    n1, n2 = _outward_gradient(x, y, piece, spec)
    if spec.delta == 0:
        corner = np.abs(t - math.pi) <= 1e-14
        n1 = np.where(corner, -1.0, n1)
        n2 = np.where(corner, 0.0, n2)
        piece = np.where(corner, int(Piece.FILLET), piece)
    radial = n1 * c + n2 * s
    if np.any(radial <= 0):
        raise MeshDomainError("boundary is not transversal to the rays from the origin (domain not star-shaped)")
    speed = rho / radial
    weight = speed * (1.0 if dtheta is None else dtheta)
    return BoundarySamples(t, x, y, n1, n2, _class_from(piece, n1, tol), np.broadcast_to(weight, t.shape).copy(), piece)


def sample_boundary(spec: DomainSpec, n: int = 2048) -> BoundarySamples:
    """n samples at equally spaced polar angles 2 pi k / n."""
    t = TWO_PI * np.arange(n) / n
    return boundary_samples(t, spec, dtheta=TWO_PI / n)


def on_line(x, y, tol=1e-12):
    """Membership in either polar line, outside the closed disc."""
    upper = np.abs(y - x - SQRT2) <= tol
    lower = np.abs(y + x + SQRT2) <= tol
    return (upper | lower) & (x * x + y * y >= 1.0 - tol)


def classify_arc(sample: BoundarySample, spec: DomainSpec, tol: float = CLASSIFY_TOL) -> ArcClass:
    """Arc class of a boundary sample from its position and normal.

    Raises
    ------
    ClassificationError
        If the point is farther than ``1e-9`` from the boundary.
    """
    x, y = sample.point
    theta = math.atan2(y, x) % TWO_PI
    if abs(math.hypot(x, y) - boundary_radius(theta, spec)) > 1e-9:
        raise ClassificationError(f"point ({x}, {y}) is not on the boundary")
    piece = int(boundary_piece(theta, spec))
    if piece == Piece.FILLET or (spec.delta == 0 and abs(theta - math.pi) <= 1e-14):
        return ArcClass.CORNER_FILLET
    if piece in (Piece.UPPER_LINE, Piece.LOWER_LINE) and on_line(x, y, tol=1e-9):
        return ArcClass.CHARACTERISTIC
    n1 = sample.normal[0]
    if n1 > tol:
        return ArcClass.TAU1
    if n1 < -tol:
        return ArcClass.TAU2
    return ArcClass.DEGENERATE


def contains(spec: DomainSpec, x, y, tol: float = 1e-12):
    """True for points of the closed domain (radial test against rho)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    rho = np.atleast_1d(boundary_radius(np.arctan2(y, x).ravel(), spec)).reshape(r.shape)
    return r <= rho + tol


def domain_area(spec: DomainSpec) -> float:
    """Area by adaptive quadrature of rho^2 / 2 between breakpoints."""
    bps = spec.breakpoints()
    edges = bps + [bps[0] + TWO_PI]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda t: 0.5 * boundary_radius(t, spec) ** 2, a, b, epsabs=1e-13, epsrel=1e-13, limit=200)
        total += val
    return total


def boundary_length(spec: DomainSpec) -> float:
    bps = spec.breakpoints()
    edges = bps + [bps[0] + TWO_PI]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += _segment_length(spec, a, b)
    return total


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _segment_length(spec, a, b):
    # Gauss-Legendre on one smooth segment
    t = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
    return float(0.5 * (b - a) * np.dot(_GL_WEIGHTS, boundary_samples(t, spec).weight))


def _allocate(weights: np.ndarray, n: int) -> np.ndarray:
    counts = np.maximum(1, np.round(n * weights).astype(int))
    counts[np.argmax(counts)] += n - counts.sum()
    return counts


def angular_nodes(spec: DomainSpec, n_theta: int) -> np.ndarray:
    """n_theta polar angles, uniform within each boundary segment.

    Every breakpoint is a node, so each boundary edge lies in a single piece.
    Nodes are allotted in proportion to segment length, with every segment
    receiving at least n_theta/16 of them so that the fillet is resolved.
    The allotment is made at the coarsest n_theta / 2^k >= 16 and scaled up,
    so meshes at n_theta and 2 n_theta are nested on the boundary.
    """
    bps = spec.breakpoints()
    edges = bps + [bps[0] + TWO_PI]
    lengths = np.array([_segment_length(spec, a, b) for a, b in zip(edges[:-1], edges[1:])])
    w = np.maximum(lengths / lengths.sum(), 1.0 / 16.0)
    w = w / w.sum()
    base, factor = n_theta, 1
    while base % 2 == 0 and base // 2 >= 16:
        base //= 2
        factor *= 2
    counts = factor * _allocate(w, base)
    if np.any(counts < 1) or counts.sum() != n_theta:
        raise MeshQualityError(f"n_theta={n_theta} is too small to resolve every boundary segment")
    nodes = [np.linspace(a, b, m, endpoint=False) for a, b, m in zip(edges[:-1], edges[1:], counts)]
    return np.mod(np.concatenate(nodes), TWO_PI)


@dataclass(frozen=True)
class BoundaryEdge:
    v0: int
    v1: int
    length: float
    edge_normal: tuple[float, float]


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counter-clockwise
    boundary_edges: np.ndarray  # (ne, 2) vertex pairs, ccw along the boundary
    boundary: BoundarySamples  # one sample per boundary edge at the mid-angle
    spec: DomainSpec = field(compare=False)
    n_theta: int = 0
    n_r: int = 0

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def area(self) -> float:
        return float(self.signed_areas().sum())

    def edge_geometry(self):
        """Midpoints, lengths and outward unit normals of the boundary polygon edges."""
        a = self.vertices[self.boundary_edges[:, 0]]
        b = self.vertices[self.boundary_edges[:, 1]]
        d = b - a
        length = np.hypot(d[:, 0], d[:, 1])
        normal = np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None]
        return 0.5 * (a + b), length, normal

    @property
    def h(self) -> float:
        p = self.vertices[self.triangles]
        lens = [np.hypot(*(p[:, (k + 1) % 3] - p[:, k]).T) for k in range(3)]
        return float(np.max(lens))


def generate_mesh(spec: DomainSpec, n_theta: int, n_r: int) -> Mesh:
    """Boundary-conforming polar tensor mesh: rings at r_j = j/n_r scaled by rho.

    The origin is joined to the first ring by a fan; the quads between rings
    are split into two triangles each.
    """
    if n_theta < 16 or n_r < 4:
        raise ParameterError(f"need n_theta >= 16 and n_r >= 4, got {n_theta}, {n_r}")
    theta = angular_nodes(spec, n_theta)
    # star-shape check: samples between nodes as well as at nodes
    dense = np.linspace(0.0, TWO_PI, 8 * n_theta, endpoint=False)
    boundary_samples(np.concatenate([theta, dense]), spec)
    rho = np.atleast_1d(boundary_radius(theta, spec))
    r = np.arange(1, n_r + 1) / n_r
    ring = r[:, None] * rho[None, :]
    xs = np.concatenate([[0.0], (ring * np.cos(theta)).ravel()])
    ys = np.concatenate([[0.0], (ring * np.sin(theta)).ravel()])
    # the outer ring sits exactly on rho; keep it bit-identical with boundary_radius
    vertices = np.stack([xs, ys], axis=1)

    def vid(j, i):
        return 1 + j * n_theta + (i % n_theta)

    tris = [(0, vid(0, i), vid(0, i + 1)) for i in range(n_theta)]
    for j in range(n_r - 1):
        for i in range(n_theta):
            a, b, c, d = vid(j, i), vid(j, i + 1), vid(j + 1, i + 1), vid(j + 1, i)
            tris.append((a, d, c))
            tris.append((a, c, b))
    triangles = np.array(tris, dtype=np.int64)
    edges = np.array([(vid(n_r - 1, i), vid(n_r - 1, i + 1)) for i in range(n_theta)], dtype=np.int64)

    t_next = np.concatenate([theta[1:], [theta[0] + TWO_PI]])
    t_next = np.where(t_next < theta, t_next + TWO_PI, t_next)
    mid = 0.5 * (theta + t_next)
    a = vertices[edges[:, 0]]
    b = vertices[edges[:, 1]]
    chord = np.hypot(*(b - a).T)
    samples = boundary_samples(mid, spec)
    samples = BoundarySamples(**{**{f: getattr(samples, f) for f in samples.__dataclass_fields__}, "weight": chord})

    mesh = Mesh(vertices, triangles, edges, samples, spec, n_theta, n_r)
    areas = mesh.signed_areas()
    if np.any(areas <= 1e-14 * mesh.area):
        k = int(np.argmin(areas))
        raise MeshQualityError(f"triangle {k} has non-positive or negligible area {areas[k]:.3e}")
    return mesh


def _fmt(v: float) -> str:
    return repr(float(v))


def write_mesh_csv(mesh: Mesh, outdir: str) -> list[str]:
    """vertices.csv, triangles.csv and boundary.csv, floats at full precision."""
    os.makedirs(outdir, exist_ok=True)
    paths = [os.path.join(outdir, n) for n in ("vertices.csv", "triangles.csv", "boundary.csv")]
    with open(paths[0], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y"])
        for k, (x, y) in enumerate(mesh.vertices):
            w.writerow([k, _fmt(x), _fmt(y)])
    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v0", "v1", "v2"])
        w.writerows(mesh.triangles.tolist())
    b = mesh.boundary
    with open(paths[2], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v0", "v1", "x", "y", "n1", "n2", "class", "weight"])
        for k in range(len(b)):
            v0, v1 = mesh.boundary_edges[k]
            w.writerow([int(v0), int(v1), _fmt(b.x[k]), _fmt(b.y[k]), _fmt(b.n1[k]), _fmt(b.n2[k]), ArcClass(int(b.arc_class[k])).label, _fmt(b.weight[k])])
    return paths
