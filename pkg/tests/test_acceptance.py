"""Acceptance criteria 1-14, each at its stated tolerance.

Every test records a one-line PASS/FAIL summary (printed at the end of the
pytest run) before asserting, so failing criteria still report their numbers.
"""

import math
import time

import numpy as np
import pytest

from npspectra import geometry, layerpot
from npspectra.bergman import area_moments, boundary_moments
from npspectra.beurling import (BergmanConfig, bergman_spectrum, exterior_spectrum_surrogate,
                                mobius_invariance_check)
from npspectra.bounds import essbound_check, mass_above, validate_domain
from npspectra.conformal import (MobiusMap, convexity_certificate, random_admissible_spec,
                                 sc_map)

from conftest import ellipse_levels, record_criterion

PRESETS = ["disk", "ellipse:2,1", "square", "rectangle:3,1", "regular_ngon:6",
           "truncated_wedge:pi/3", "lens:pi/4,pi/5"]
CORNER_MESH = {"panels_per_edge": 4, "grading_levels": 8}


def _prep(name):
    return geometry.rescale_to_normal(geometry.build_domain(name))


def _mesh(name, smooth_nodes=256, **kw):
    d = _prep(name)
    if d.smooth:
        return geometry.build_boundary_mesh(d, n_nodes=smooth_nodes)
    return geometry.build_boundary_mesh(d, **{**CORNER_MESH, **kw})


def _nearest(values, target):
    return float(np.min(np.abs(np.asarray(values) - target)))


def test_criterion_01_disk_nullity():
    t0 = time.perf_counter()
    ny = layerpot.nystrom_spectrum(_mesh("disk", 256))
    bg = bergman_spectrum(geometry.disk(1.0), BergmanConfig(degree=16))
    dt = time.perf_counter() - t0
    ok = (ny.spectral_radius <= 1e-6 and bg.spectral_radius <= 1e-8
          and _nearest(ny.eigenvalues, 1.0) <= 1e-10 and dt < 5)
    record_criterion(1, ok, f"nystrom radius {ny.spectral_radius:.1e} (<=1e-6), bergman radius "
                     f"{bg.spectral_radius:.1e} (<=1e-8), |lambda-1| "
                     f"{_nearest(ny.eigenvalues, 1.0):.1e} (<=1e-10)", dt)
    assert ok


def test_criterion_02_ellipse_levels():
    t0 = time.perf_counter()
    levels = ellipse_levels()
    # convergence check: the leading eigenvalue must settle to 4 digits
    leading = []
    for n in (64, 128, 256):
        r = layerpot.nystrom_spectrum(_mesh("ellipse:2,1", n))
        leading.append(np.sort(r.mean_zero)[-1])
    settled = abs(leading[-1] - leading[-2]) < 5e-5
    ny = r.mean_zero
    bg = bergman_spectrum(geometry.ellipse(2.0, 1.0), BergmanConfig(degree=24)).eigenvalues
    err = max(max(_nearest(v, s * lev) for s in (1, -1) for lev in levels) for v in (ny, bg))
    dt = time.perf_counter() - t0
    ok = err <= 1e-3 and settled and dt < 60
    record_criterion(2, ok, f"max deviation from +-(1/3)^n over both pipelines {err:.1e} (<=1e-3); "
                     f"leading eigenvalue settled at {leading[-1]:.6f}", dt)
    assert ok


def test_criterion_03_square_radius():
    t0 = time.perf_counter()
    ny = layerpot.nystrom_spectrum(_mesh("square", grading_levels=8))
    bg = bergman_spectrum(geometry.square(1.0), BergmanConfig(degree=24, grading_levels=8))
    dt = time.perf_counter() - t0
    ok_ny = abs(ny.spectral_radius - 0.5) <= 0.02
    ok_bg = abs(bg.spectral_radius - 0.5) <= 0.02
    ok = ok_ny and ok_bg and dt < 120
    record_criterion(3, ok, f"nystrom grading 8: {ny.spectral_radius:.4f} "
                     f"({'ok' if ok_ny else 'out'}); bergman degree 24: "
                     f"{bg.spectral_radius:.4f} ({'ok' if ok_bg else 'out'}); target 0.50+-0.02", dt)
    assert ok


def test_criterion_04_elongated_rectangle():
    t0 = time.perf_counter()
    r = layerpot.nystrom_spectrum(_mesh("rectangle:3,1", grading_levels=8))
    dt = time.perf_counter() - t0
    ok = r.spectral_radius - 0.5 >= 0.005 and dt < 120
    record_criterion(4, ok, f"aspect 3 radius {r.spectral_radius:.4f} (margin "
                     f"{r.spectral_radius - 0.5:+.4f}, need >= 0.005)", dt)
    assert ok


@pytest.mark.slow
def test_criterion_05_kuhnau_property_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    margins = []
    for _ in range(20):
        d = geometry.rescale_to_normal(geometry.random_arc_polygon(rng))
        res = layerpot.nystrom_spectrum(geometry.build_boundary_mesh(d, **CORNER_MESH))
        margins.append(validate_domain(d, res).verdicts["kuhnau"]["margin"])
    dt = time.perf_counter() - t0
    ok = min(margins) >= 0 and dt < 600
    record_criterion(5, ok, f"20 random arc-polygons, worst margin radius - (bound - 0.02) = "
                     f"{min(margins):+.4f}", dt)
    assert ok


def test_criterion_06_plemelj():
    t0 = time.perf_counter()
    e = layerpot.assemble_operators(_mesh("ellipse:2,1", 512))
    s = layerpot.assemble_operators(_mesh("square", grading_levels=6))
    pe = layerpot.plemelj_residual(e.Kmat, e.Smat, e.weights)
    ps = layerpot.plemelj_residual(s.Kmat, s.Smat, s.weights)
    dt = time.perf_counter() - t0
    ok = pe <= 1e-6 and ps <= 1e-4
    record_criterion(6, ok, f"ellipse 512 nodes {pe:.1e} (<=1e-6), square grading 6 {ps:.1e} "
                     f"(<=1e-4)", dt)
    assert ok


def test_criterion_07_origin_symmetry():
    t0 = time.perf_counter()
    rows, ok = [], True
    for name in PRESETS:
        r = layerpot.nystrom_spectrum(_mesh(name))
        good = r.pairing_residual <= 10 * r.plemelj_residual
        ok &= good
        rows.append(f"{name.split(':')[0]} {r.pairing_residual:.1e}/{10 * r.plemelj_residual:.1e}"
                    f"{'' if good else '!'}")
    dt = time.perf_counter() - t0
    record_criterion(7, ok, "pairing/10*plemelj: " + ", ".join(rows), dt)
    assert ok


def test_criterion_08_mobius_invariance():
    t0 = time.perf_counter()
    # ellipse(2, 1) has diameter 4; the pole sits three diameters from the center
    dev = mobius_invariance_check(geometry.ellipse(2.0, 1.0), MobiusMap.inversion(12.0),
                                  BergmanConfig(degree=24))
    dt = time.perf_counter() - t0
    ok = dev <= 1e-3
    record_criterion(8, ok, f"top-10 singular value deviation {dev:.1e} (<=1e-3)", dt)
    assert ok


def test_criterion_09_exterior_surrogate():
    t0 = time.perf_counter()
    rows, ok = [], True
    for name in ("disk", "ellipse:2,1", "square"):
        d = geometry.build_domain(name)
        inner = layerpot.nystrom_spectrum(_mesh(name)).spectral_radius
        kw = {"n_nodes": 256} if d.smooth else dict(CORNER_MESH)
        outer = exterior_spectrum_surrogate(d, method="nystrom", cfg=kw).spectral_radius
        good = abs(inner - outer) <= 0.03
        ok &= good
        rows.append(f"{name.split(':')[0]} {inner:.4f} vs {outer:.4f}")
    dt = time.perf_counter() - t0
    record_criterion(9, ok, "interior vs exterior radius: " + ", ".join(rows) + " (<=0.03)", dt)
    assert ok


def test_criterion_10_jump_formulae():
    t0 = time.perf_counter()
    c = _mesh("disk", 512)
    th = 2 * math.pi * c.params
    rc = layerpot.jump_test(c, np.cos(2 * th) + 0.5, np.sin(3 * th) - 0.2 * np.cos(th))
    s = _mesh("square", grading_levels=6)
    x, y = s.nodes.real, s.nodes.imag
    rs = layerpot.jump_test(s, x * x - y + 0.3, np.exp(x) * np.cos(y))
    dt = time.perf_counter() - t0
    ok = rc.max_residual <= 1e-6 and rs.max_residual <= 1e-3
    record_criterion(10, ok, f"circle 512 nodes {rc.max_residual:.1e} (<=1e-6), square away from "
                     f"corners {rs.max_residual:.1e} (<=1e-3)", dt)
    assert ok


def test_criterion_11_poincare_quotient():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst_gap, worst_excess = 0.0, -np.inf
    for name in PRESETS:
        mesh = _mesh(name)
        ops = layerpot.assemble_operators(mesh)
        res = layerpot.symmetrized_spectrum(ops.Kmat, ops.Smat, ops.weights, keep_vectors=True)
        ev = res.eigenvalues
        kc = int(np.argmin(np.abs(ev - res.constant_eigenvalue)))
        others = np.delete(np.arange(ev.size), kc)
        top = others[np.argmax(np.abs(ev[others]))]
        q = layerpot.poincare_quotient(ops.Kmat, ops.Smat, ops.weights, res.vectors[:, top])
        worst_gap = max(worst_gap, abs(abs(q.quotient) - res.spectral_radius))
        # random densities with the constant sector removed in the S-inner product
        A = ops.weights[:, None] * ops.Smat
        A = 0.5 * (A + A.T)
        gc = res.vectors[:, kc]
        for _ in range(100):
            g = rng.standard_normal(mesh.n)
            g -= (g @ A @ gc) / (gc @ A @ gc) * gc
            qq = layerpot.poincare_quotient(ops.Kmat, ops.Smat, ops.weights, g).quotient
            worst_excess = max(worst_excess, abs(qq) - res.spectral_radius)
    dt = time.perf_counter() - t0
    ok = worst_gap <= 1e-8 and worst_excess <= 0
    record_criterion(11, ok, f"top-vector quotient vs radius {worst_gap:.1e} (<=1e-8); "
                     f"max random |quotient| - radius {worst_excess:.2e} (<=0)", dt)
    assert ok


def test_criterion_12_moments_cross_check():
    t0 = time.perf_counter()
    worst = 0.0
    m, n = np.meshgrid(np.arange(10), np.arange(10), indexing="ij")
    mask = m + n <= 8
    for name in ("disk", "ellipse:2,1", "square"):
        d = _prep(name)
        mesh = geometry.build_boundary_mesh(d, rule="gauss", panels_per_edge=4, grading_levels=8)
        q = geometry.build_area_quadrature(d, radial_order=16, mesh=mesh)
        diff = np.abs(boundary_moments(mesh, 8).mu - area_moments(q, 8).mu)
        worst = max(worst, float(diff[mask].max()))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10
    record_criterion(12, ok, f"max |boundary - area| moment for m+n<=8: {worst:.1e} (<=1e-10)", dt)
    assert ok


def test_criterion_13_convexity_certificate():
    t0 = time.perf_counter()
    rng = np.random.default_rng(13)
    held, worst_path = 0, 0.0
    for _ in range(100):
        spec = random_admissible_spec(rng)
        held += bool(spec.admissible and convexity_certificate(spec).holds)
        w = 0.95 * np.exp(2j * math.pi * rng.uniform())
        via = [0.6 * np.exp(2j * math.pi * rng.uniform())]
        direct = sc_map(spec, w)
        worst_path = max(worst_path, abs(direct - sc_map(spec, w, path=via)) / max(1, abs(direct)))
    dt = time.perf_counter() - t0
    ok = held == 100 and worst_path <= 1e-9
    record_criterion(13, ok, f"certificate holds {held}/100; path independence {worst_path:.1e} "
                     f"(<=1e-9)", dt)
    assert ok


def test_criterion_14_essential_bound_consistency():
    t0 = time.perf_counter()
    rows, ok = [], True
    for name in ("lens:pi/4,pi/5", "lens:pi/3,pi/4"):
        d = _prep(name)
        eb = essbound_check(geometry.interior_angles(d))
        assert eb is not None
        masses = []
        for lev in (6, 10, 14):
            mesh = geometry.build_boundary_mesh(d, panels_per_edge=4, grading_levels=lev)
            masses.append(mass_above(layerpot.nystrom_spectrum(mesh), eb.upper + 0.02))
        good = all(b <= a for a, b in zip(masses, masses[1:]))
        ok &= good
        rows.append(f"{name} masses " + "/".join(f"{m:.3f}" for m in masses))
    dt = time.perf_counter() - t0
    record_criterion(14, ok, "; ".join(rows) + " (non-increasing)", dt)
    assert ok
