"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the criterion
lines appear in the output whatever the capture mode.
"""

import math
import time

import numpy as np
import pytest

from gmkeldysh.boundary import admissibility_sweep, beta, beta_alternate
from gmkeldysh.coefficients import Polynomial, SmoothField, manufactured_default, preset
from gmkeldysh.geometry import SQRT2, DomainSpec, generate_mesh, sample_boundary
from gmkeldysh.operator import (
    apply_operator,
    char_form,
    check_gbound,
    gbound_lower_bound,
    original_lhs,
    q_closed_form,
    q_from_symmetric_part,
    rhs_matrix,
)
from gmkeldysh.solver import (
    BoundaryData,
    SolutionField,
    assemble,
    convergence_study,
    energy_identity,
    solve,
    stability_study,
)
from gmkeldysh.verify import interior_samples

SEED = 12345


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}  {title}: {detail}  ({elapsed:.2f}s, budget {budget:g}s)"
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def test_criterion_1_q_identity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    x, y = interior_samples(DomainSpec(), 10_000, rng)
    worst = 0.0
    for name in ("default", "affine", "product"):
        c = preset(name)
        diff = np.abs(q_closed_form((x, y), c).as_array() - q_from_symmetric_part((x, y), c))
        worst = max(worst, float(diff.max()))
    elapsed = time.perf_counter() - t0
    assert report(1, "Q identity", worst <= 1e-12, f"max |closed form - (B* - div A / 2)| = {worst:.2e} over 3 presets", elapsed, 1.0)


def test_criterion_2_positivity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    spec = DomainSpec()
    xi, yi = interior_samples(spec, 10_000, rng)
    s = sample_boundary(spec, 2048)
    x, y = np.concatenate([xi, s.x]), np.concatenate([yi, s.y])
    c = preset("default")
    rep = check_gbound((x, y), c)
    ok_default = rep.all_passed and rep.all_positive_definite
    # drop gamma1 just below the pointwise bound at the sample where it is largest
    bound = gbound_lower_bound((x, y), c)
    k = int(np.argmax(bound))
    low = preset("default", gamma1=0.99 * float(bound[k]))
    flipped = check_gbound((x, y), low)
    ok_flip = (not flipped.all_passed) and (not flipped.all_positive_definite)
    elapsed = time.perf_counter() - t0
    detail = f"default passes={ok_default} (min margin {rep.margin.min():.3f}); gamma1=0.99*max bound flips={ok_flip}"
    assert report(2, "positivity", ok_default and ok_flip, detail, elapsed, 1.0)


def test_criterion_3_characteristic_identities(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    s = np.linspace(-3.0, -SQRT2 / 2, 2001)
    lines = max(
        np.abs(char_form((s, s + SQRT2), (np.ones_like(s), np.ones_like(s)))).max(),
        np.abs(char_form((s, -s - SQRT2), (np.ones_like(s), -np.ones_like(s)))).max(),
    )
    t = np.linspace(0.0, 2 * math.pi, 4096, endpoint=False)
    circle = np.abs(char_form((np.cos(t), np.sin(t)), (-np.sin(t), np.cos(t)))).max()
    # 1000 random points of the closed disc, a tenth of them on the circle itself
    r = np.sqrt(rng.uniform(0, 1, 1000))
    r[:100] = 1.0
    a, b = rng.uniform(0, 2 * math.pi, (2, 1000))
    disc = char_form((r * np.cos(a), r * np.sin(a)), (np.cos(b), np.sin(b))).max()
    elapsed = time.perf_counter() - t0
    ok = lines <= 1e-12 and circle <= 1e-12 and disc <= 1e-12
    detail = f"|Phi| on lines {lines:.1e}, on circle {circle:.1e}; max Phi in disc {disc:.1e}"
    assert report(3, "characteristic identities", ok, detail, elapsed, 1.0)


def test_criterion_4_admissibility_sweep(report):
    t0 = time.perf_counter()
    sweep = admissibility_sweep(DomainSpec(), 2048)
    s = sweep.summary()
    elapsed = time.perf_counter() - t0
    ok = (
        s["n_samples"] >= 2048
        and s["min_mu11"] >= -1e-10
        and s["min_det_mu"] >= -1e-10
        and s["range_failures"] == 0
        and s["span_failures"] == 0
        and s["max_abs_det_mu_circle_and_characteristic"] <= 1e-10
    )
    detail = (
        f"{s['n_samples']} samples, min mu11 {s['min_mu11']:.1e}, min det {s['min_det_mu']:.1e}, "
        f"range/span failures {s['range_failures']}/{s['span_failures']}, "
        f"|det| on circle+lines {s['max_abs_det_mu_circle_and_characteristic']:.1e}"
    )
    assert report(4, "admissibility sweep", ok, detail, elapsed, 5.0)


def test_criterion_5_singularity_removal(report):
    t0 = time.perf_counter()
    s = sample_boundary(DomainSpec(), 2048)
    small = np.array([0.0, 1e-12, -1e-12, 1e-10, -1e-10, 1e-8, -1e-8])
    n1 = np.concatenate([s.n1, np.tile(small, len(s))])
    n2 = np.concatenate([s.n2, np.repeat(np.sign(s.y) + (s.y == 0), small.size) * np.sqrt(1 - np.tile(small, len(s)) ** 2)])
    x = np.concatenate([s.x, np.repeat(s.x, small.size)])
    y = np.concatenate([s.y, np.repeat(s.y, small.size)])
    direct = beta((x, y), (n1, n2))
    worst = float(np.abs(direct - beta_alternate((x, y), (n1, n2))).max())
    # for contrast: the unsimplified form where it is defined
    ok_lit = (np.abs(n1) >= 1e-8) & (np.abs(n2) >= 1e-8)
    lit = beta_alternate((x[ok_lit], y[ok_lit]), (n1[ok_lit], n2[ok_lit]), rewritten=False)
    literal = float(np.abs(direct[ok_lit] - lit).max())
    elapsed = time.perf_counter() - t0
    detail = f"max |beta - alternate| = {worst:.1e} incl. n1 in {{0, +-1e-12 .. +-1e-8}} (unsimplified form: {literal:.1e})"
    assert report(5, "singularity removal", worst <= 1e-12, detail, elapsed, 1.0)


def test_criterion_6_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    c = preset("affine")
    worst = 0.0
    for _ in range(100):
        U = SmoothField.from_polynomials(Polynomial.random(rng, 3), Polynomial.random(rng, 3))
        x, y = rng.uniform(-1.5, 1.0, 100), rng.uniform(-0.99, 0.99, 100)
        lhs = apply_operator(U, (x, y), c)
        orig = original_lhs(U.value(x, y), U.dx(x, y), U.dy(x, y), (x, y), c)
        rhs = np.einsum("kij,jk->ik", rhs_matrix((x, y)), orig)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    elapsed = time.perf_counter() - t0
    assert report(6, "equivalence with the original system", worst <= 1e-12, f"max |LU - T (original)| = {worst:.1e}", elapsed, 1.0)


def test_criterion_7_energy_identity(report):
    t0 = time.perf_counter()
    c = preset("default")
    meshes = [generate_mesh(DomainSpec(), n, n // 4) for n in (64, 128, 256)]
    ratios = {}
    for name, U in (("(1,0)", SmoothField.constant(1.0, 0.0)), ("U*", manufactured_default())):
        d = [energy_identity(U, c, m).defect for m in meshes]
        ratios[name] = (d[0] / d[1], d[1] / d[2])
    elapsed = time.perf_counter() - t0
    ok = all(3.0 <= r <= 5.0 for pair in ratios.values() for r in pair)
    detail = ", ".join(f"{k} ratios {a:.2f} {b:.2f}" for k, (a, b) in ratios.items())
    assert report(7, "energy identity second order", ok, detail, elapsed, 30.0)


def test_criterion_8_manufactured_convergence(report):
    t0 = time.perf_counter()
    spec, c = DomainSpec(), preset("default")
    rows = convergence_study(spec, c, manufactured_default(), levels=3, n_theta0=32)
    err = [r.l2_error for r in rows]
    decreasing = all(b < a for a, b in zip(err, err[1:]))
    ratio = err[-1] / err[0]
    const_err = 0.0
    zero_max = 0.0
    for n in (32, 64, 128):
        mesh = generate_mesh(spec, n, n // 4)
        U = SmoothField.constant(1.0, 2.0)
        res = solve(assemble(mesh, c, BoundaryData.from_field(U), source=lambda x, y: apply_operator(U, (x, y), c)))
        exact = SolutionField.interpolate(mesh, U).as_vector()
        const_err = max(const_err, float(np.abs(res.solution.as_vector() - exact).max()))
        zero = solve(assemble(mesh, c.with_fields(f1=0.0, f2=0.0)))
        zero_max = max(zero_max, float(np.abs(zero.solution.as_vector()).max()))
    elapsed = time.perf_counter() - t0
    ok = decreasing and ratio < 0.25 and const_err <= 1e-8 and zero_max == 0.0
    detail = (
        f"l2 errors {', '.join(f'{e:.3e}' for e in err)} (finest/coarsest {ratio:.3f}); "
        f"constants to {const_err:.1e}; homogeneous max |U| {zero_max:.1e}"
    )
    assert report(8, "manufactured-solution convergence", ok, detail, elapsed, 300.0)


def test_criterion_9_stability(report):
    t0 = time.perf_counter()
    out = stability_study(DomainSpec(), preset("default"), levels=3, n_theta0=32)
    ratios = [r for _, r, _ in out]
    nonzero = min(float(np.abs(res.solution.u1).max()) for _, _, res in out)
    elapsed = time.perf_counter() - t0
    ok = max(ratios) < 2.0 * ratios[0] and min(ratios) > 0.5 * ratios[0] and nonzero > 0
    detail = f"|U_h|/|F| = {', '.join(f'{r:.4f}' for r in ratios)}; min max|u1| {nonzero:.3f}"
    assert report(9, "stability", ok, detail, elapsed, 300.0)
