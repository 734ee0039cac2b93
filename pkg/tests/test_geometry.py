import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from shapely.geometry import Polygon

from gmkeldysh.errors import ClassificationError, ParameterError
from gmkeldysh.geometry import (
    SQRT2,
    ArcClass,
    BoundarySample,
    DomainSpec,
    Piece,
    angular_nodes,
    boundary_length,
    boundary_radius,
    boundary_samples,
    classify_arc,
    contains,
    corner_fillet,
    domain_area,
    generate_mesh,
    sample_boundary,
    write_mesh_csv,
)
from gmkeldysh.operator import Point

deltas = st.floats(0.01, 0.2)
epsilons = st.floats(0.01, 0.3)


def _polygon(spec, n=100_000):
    t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    r = boundary_radius(t, spec)
    return Polygon(np.c_[r * np.cos(t), r * np.sin(t)])


def test_area_and_length_against_polygon(spec):
    poly = _polygon(spec)
    assert domain_area(spec) == pytest.approx(poly.area, rel=1e-8)
    assert boundary_length(spec) == pytest.approx(poly.length, rel=1e-8)


def test_sharp_corner_area_closed_form():
    # disc + (kite - quarter disc) - two caps; the kite between the polar lines has area 1
    spec = DomainSpec(delta=0.0)
    w = SQRT2 / 2
    cap, _ = quad(lambda x: math.sqrt(1 - x * x) - math.sqrt(1 - x * x - spec.h(x)), -w, w, epsabs=1e-13)
    expected = math.pi + 1.0 - math.pi / 4 - 2 * cap
    assert domain_area(spec) == pytest.approx(expected, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(delta=deltas)
def test_fillet_removes_delta_squared_over_five(delta):
    # [DERIVED] integral of g(y) - (|y| - sqrt2) over [-delta, delta] = delta^2 / 5
    sharp = domain_area(DomainSpec(delta=0.0))
    assert sharp - domain_area(DomainSpec(delta=delta)) == pytest.approx(delta**2 / 5, rel=1e-7, abs=1e-12)


def test_frozen_default_area(spec):
    # [DERIVED] adaptive quadrature of rho^2 / 2, cross-checked against a 1e5-gon
    assert domain_area(spec) == pytest.approx(3.322035826491353, abs=1e-11)


@settings(max_examples=40, deadline=None)
@given(delta=deltas)
def test_fillet_joins_lines_c2(delta):
    f = corner_fillet(delta)
    for s in (-1.0, 1.0):
        y = s * delta
        assert f.g(y) == pytest.approx(abs(y) - SQRT2, abs=1e-14)
        assert f.dg(y) == pytest.approx(s, abs=1e-13)
        assert f.d2g(y) == pytest.approx(0.0, abs=1e-10 / delta)


@settings(max_examples=40, deadline=None)
@given(eps=epsilons, x=st.floats(-1.0, 1.0))
def test_cap_profile_bounds(eps, x):
    spec = DomainSpec(epsilon=eps)
    h = float(spec.h(x))
    assert 0.0 <= h <= 1.0 - x * x + 1e-15


def test_cap_vanishes_c2_at_tangency(spec):
    for x in (-SQRT2 / 2, SQRT2 / 2):
        assert spec.h(x) == 0.0
        assert spec.dh(x) == pytest.approx(0.0, abs=1e-15)
        assert spec.d2h(x) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("kwargs", [{"epsilon": 0.0}, {"epsilon": 0.31}, {"delta": -0.01}, {"delta": 0.21}, {"cap_halfwidth": 0.8}])
def test_domain_spec_validation(kwargs):
    with pytest.raises(ParameterError):
        DomainSpec(**kwargs)


def test_corner_fillet_range():
    with pytest.raises(ParameterError):
        corner_fillet(0.0)


def test_samples_unit_normals_and_outward(spec):
    s = sample_boundary(spec, 2048)
    np.testing.assert_allclose(np.hypot(s.n1, s.n2), 1.0, atol=1e-14)
    # a small step along the normal leaves the domain, a step against it stays inside
    step = 1e-6
    assert not np.any(contains(spec, s.x + step * s.n1, s.y + step * s.n2))
    assert np.all(contains(spec, s.x - step * s.n1, s.y - step * s.n2))
    # counter-clockwise tangent: the outward normal rotated a quarter turn to the left
    np.testing.assert_array_equal(s.t1, -s.n2)
    np.testing.assert_array_equal(s.t2, s.n1)


def test_sample_weights_sum_to_length(spec):
    s = sample_boundary(spec, 4096)
    assert s.weight.sum() == pytest.approx(boundary_length(spec), rel=1e-5)


def test_arc_classes_on_default_domain(spec):
    s = sample_boundary(spec, 2048)
    cls = s.arc_class
    lines = (s.piece == Piece.UPPER_LINE) | (s.piece == Piece.LOWER_LINE)
    assert np.all(cls[lines] == ArcClass.CHARACTERISTIC)
    assert np.all(cls[s.piece == Piece.FILLET] == ArcClass.CORNER_FILLET)
    cap = s.piece == Piece.CAP
    assert np.all(cls[cap & (s.n1 > 1e-9)] == ArcClass.TAU1)
    assert np.all(cls[cap & (s.n1 < -1e-9)] == ArcClass.TAU2)
    # n1 vanishes at the cap crests
    assert ArcClass(int(boundary_samples(np.array([math.pi / 2]), spec).arc_class[0])) == ArcClass.DEGENERATE
    assert ArcClass.TAU1.label == "Tau1"


def test_classify_single_sample(spec):
    s = sample_boundary(spec, 64)
    k = 5
    assert classify_arc(s[k], spec) == ArcClass(int(s.arc_class[k]))
    bogus = BoundarySample(Point(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), ArcClass.TAU1, 0.0, 0.0)
    with pytest.raises(ClassificationError):
        classify_arc(bogus, spec)


def test_sharp_corner_sample(spec):
    s = boundary_samples(np.array([math.pi]), DomainSpec(delta=0.0))
    assert (s.x[0], s.y[0]) == pytest.approx((-SQRT2, 0.0))
    assert (s.n1[0], s.n2[0]) == (-1.0, 0.0)


@pytest.mark.parametrize("n_theta", [32, 64, 128])
def test_angular_nodes_nested_and_hit_breakpoints(spec, n_theta):
    coarse = angular_nodes(spec, n_theta)
    fine = angular_nodes(spec, 2 * n_theta)
    assert coarse.size == n_theta and fine.size == 2 * n_theta
    assert np.all(np.min(np.abs(fine[None, :] - coarse[:, None]), axis=1) < 1e-12)
    for b in spec.breakpoints():
        assert np.min(np.abs(coarse - b)) < 1e-12


@pytest.mark.parametrize("n_theta,n_r", [(32, 8), (64, 16), (96, 6)])
def test_mesh_structure(spec, n_theta, n_r):
    mesh = generate_mesh(spec, n_theta, n_r)
    assert mesh.n_vertices == 1 + n_theta * n_r
    assert mesh.n_triangles == n_theta * (2 * n_r - 1)
    assert np.all(mesh.signed_areas() > 0)
    # boundary loop closes and every boundary vertex appears exactly twice
    e = mesh.boundary_edges
    np.testing.assert_array_equal(e[:, 1], np.roll(e[:, 0], -1))
    assert np.all(np.bincount(e.ravel())[np.unique(e)] == 2)
    # vertices on the boundary lie on the true curve
    v = mesh.vertices[e[:, 0]]
    np.testing.assert_allclose(np.hypot(v[:, 0], v[:, 1]), boundary_radius(np.arctan2(v[:, 1], v[:, 0]), spec), atol=1e-13)


def test_mesh_area_converges_second_order(spec):
    err = [abs(generate_mesh(spec, n, n // 4).area - domain_area(spec)) for n in (32, 64, 128)]
    assert err[0] / err[1] == pytest.approx(4.0, rel=0.25)
    assert err[1] / err[2] == pytest.approx(4.0, rel=0.25)


def test_mesh_rejects_coarse_parameters(spec):
    with pytest.raises(ParameterError):
        generate_mesh(spec, 8, 8)
    with pytest.raises(ParameterError):
        generate_mesh(spec, 32, 2)


def test_mesh_csv(tmp_path, spec):
    mesh = generate_mesh(spec, 32, 8)
    paths = write_mesh_csv(mesh, str(tmp_path))
    assert [os.path.basename(p) for p in paths] == ["vertices.csv", "triangles.csv", "boundary.csv"]
    v = np.loadtxt(paths[0], delimiter=",", skiprows=1)
    np.testing.assert_array_equal(v[:, 1:], mesh.vertices)
    b = np.genfromtxt(paths[2], delimiter=",", skip_header=1, dtype=None, encoding=None)
    assert len(b) == len(mesh.boundary_edges)
