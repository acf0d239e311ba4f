import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from npspectra import geometry
from npspectra.bergman import boundary_moments, orthonormal_basis
from npspectra.beurling import (BergmanConfig, GMatrix, PointLocationError, assemble_G,
                                bergman_spectrum, contour_T_apply, exterior_image,
                                mobius_invariance_check, takagi_spectrum)
from npspectra.conformal import MobiusMap, mobius_apply

from conftest import ellipse_levels


def _basis(d, deg, **kw):
    mesh = geometry.build_boundary_mesh(d, rule="gauss", panels_per_edge=4,
                                        grading_levels=kw.pop("grading_levels", 6), **kw)
    return mesh, orthonormal_basis(boundary_moments(mesh, deg))


def test_disk_transform_annihilates_polynomials(disk, rng):
    mesh, C = _basis(disk, 8)
    pts = 0.4 * np.sqrt(rng.uniform(0, 1, 30)) * np.exp(2j * math.pi * rng.uniform(0, 1, 30))
    T = contour_T_apply(mesh, C, None, pts)
    assert np.abs(T).max() < 1e-12


def _ray_length(s, z, phi):
    # distance from z to the boundary of the square [-s, s]^2 along direction phi
    u, v = math.cos(phi), math.sin(phi)
    ts = [c / comp for c, comp in ((s - z.real, u), (-s - z.real, u), (s - z.imag, v),
                                   (-s - z.imag, v)) if abs(comp) > 1e-15 and c / comp > 0]
    return min(ts)


def test_constant_transform_matches_polar_pv_oracle(rng):
    # With zeta - z = rho e^{i phi} the symmetric-disk principal value of
    # (1/pi) int dA / (conj(zeta) - conj(z))^2 reduces to
    # (1/pi) int_0^{2pi} e^{2 i phi} log R(phi) dphi, R the ray length.
    s = 0.3
    d = geometry.square(2 * s)
    mesh, C = _basis(d, 4)
    pts = rng.uniform(-0.25, 0.25, 6) + 1j * rng.uniform(-0.25, 0.25, 6)
    vals = contour_T_apply(mesh, C, 0, pts)
    corners = [s + s * 1j, -s + s * 1j, -s - s * 1j, s - s * 1j]
    for z, v in zip(pts, vals):
        brk = sorted(np.mod([np.angle(c - z) for c in corners], 2 * math.pi))
        cuts = list(zip([0.0] + brk, brk + [2 * math.pi]))
        part = lambda f: sum(quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0] for a, b in cuts)  # noqa: E731
        re = part(lambda p: math.cos(2 * p) * math.log(_ray_length(s, z, p)))
        im = part(lambda p: math.sin(2 * p) * math.log(_ray_length(s, z, p)))
        oracle = (re + 1j * im) / math.pi / math.sqrt(4 * s * s)
        assert abs(v - oracle) < 1e-12


def test_points_outside_rejected(square):
    mesh, C = _basis(square, 2)
    with pytest.raises(PointLocationError):
        contour_T_apply(mesh, C, 0, np.array([0.0, 0.9]))


def test_takagi_trivial_cases():
    assert np.all(takagi_spectrum(np.zeros((3, 3))).eigenvalues == 0.0)
    res = takagi_spectrum(np.diag([1 / 3, 1 / 3]).astype(complex))
    assert res.eigenvalues == pytest.approx([1 / 3, 1 / 3, -1 / 3, -1 / 3])
    assert res.spectral_radius == pytest.approx(1 / 3)


@settings(deadline=None, max_examples=25)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_takagi_matches_real_linear_eigenvalues(n, seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
    G = A + A.T
    # c -> G conj(c) on (Re c, Im c) is the real symmetric matrix below
    R = np.block([[G.real, G.imag], [G.imag, -G.real]])
    ev = np.sort(np.linalg.eigvalsh(R))[::-1]
    assert takagi_spectrum(G).eigenvalues == pytest.approx(ev, abs=1e-10)


def test_disk_galerkin_matrix_vanishes(disk):
    mesh, C = _basis(disk, 10)
    q = geometry.build_area_quadrature(disk, radial_order=16, mesh=mesh)
    G = assemble_G(mesh, C, q)
    assert isinstance(G, GMatrix)
    assert np.abs(G.G).max() < 1e-12 and G.symmetry_residual < 1e-12


def test_ellipse_bergman_spectrum():
    res = bergman_spectrum(geometry.ellipse(2.0, 1.0), BergmanConfig(degree=24))
    pos = np.sort(res.eigenvalues[res.eigenvalues > 1e-3])[::-1]
    assert pos[:3] == pytest.approx(ellipse_levels(), abs=1e-6)
    assert res.meta["domain"] == "ellipse"
    assert res.asymmetry_residual < 1e-3


def test_shifted_disk_stays_null():
    # a disk pushed through z -> 1 / (z - 3) is again a disk
    img = mobius_apply(MobiusMap.inversion(3.0), geometry.disk(1.0))
    res = bergman_spectrum(img, BergmanConfig(degree=12))
    assert res.spectral_radius < 1e-8


def test_mobius_invariance_ellipse_small_degree():
    L = MobiusMap.inversion(12.0)
    dev = mobius_invariance_check(geometry.ellipse(2.0, 1.0), L, BergmanConfig(degree=12), top=6)
    assert dev < 1e-6


def test_exterior_image_of_disk_is_disk():
    img = exterior_image(geometry.disk(1.0), 0j)
    assert img.smooth
    assert np.allclose(np.abs(img.sample(64)), 1.0)
