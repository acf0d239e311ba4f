import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from npspectra import geometry, layerpot
from npspectra.layerpot import (CapacityError, SpectrumResult, assemble_operators,
                                equilibrium_density, jump_test, mean_free, nystrom_spectrum,
                                pairing_residual, poincare_quotient, symmetrized_spectrum)

from conftest import ellipse_levels


def _circle(r=0.4, n=128):
    return geometry.build_boundary_mesh(geometry.disk(r), n_nodes=n)


def test_circle_K_is_rank_one():
    m = _circle()
    K = layerpot.assemble_K(m)
    # on a circle the kernel is 1 / (2 pi r) * ds for every pair
    assert np.allclose(K, m.weights[None, :] / (2 * math.pi * 0.4), atol=1e-14)
    assert np.allclose(K @ np.ones(m.n), 1.0, atol=1e-13)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_circle_single_layer_fourier_modes(n):
    r = 0.4
    m = _circle(r, 128)
    S, _ = layerpot.assemble_S(m)
    th = 2 * math.pi * m.params
    assert np.allclose(S @ np.cos(n * th), r / (2 * n) * np.cos(n * th), atol=1e-13)
    assert np.allclose(S @ np.ones(m.n), -r * math.log(r), atol=1e-13)


@pytest.mark.parametrize("i", [0, 7, 40, 100])
def test_square_single_layer_constant_density_on_gauss_panels(square, i):
    # adaptive quadrature of -log|x - y| / 2 pi along the four sides; the
    # symmetrization of W S costs accuracy of the order of its asymmetry
    from scipy.integrate import quad
    m = geometry.build_boundary_mesh(square, panels_per_edge=2, grading_levels=4)
    S, asym = layerpot.assemble_S(m)
    x = m.nodes[i]
    total = 0.0
    for e in square.edges:
        a, b = e.a, e.b
        f = lambda t: -math.log(abs(a + t * (b - a) - x)) * abs(b - a) / (2 * math.pi)  # noqa: E731
        on = abs(np.imag((x - a) / (b - a))) < 1e-14
        total += quad(f, 0, 1, points=[float(np.real((x - a) / (b - a)))] if on else None,
                      limit=400)[0]
    assert asym < 1e-3
    assert (S @ np.ones(m.n))[i] == pytest.approx(total, abs=1e-6)


def test_capacity_guard():
    m = geometry.build_boundary_mesh(geometry.disk(1.0), n_nodes=64)
    with pytest.raises(CapacityError):
        layerpot.assemble_S(m)


def test_disk_spectrum_null():
    res = nystrom_spectrum(_circle(0.4, 256))
    assert res.spectral_radius < 1e-12
    assert res.constant_eigenvalue == pytest.approx(1.0, abs=1e-12)


def test_ellipse_spectrum_powers(ellipse_ops):
    mesh, ops = ellipse_ops
    res = symmetrized_spectrum(ops.Kmat, ops.Smat, ops.weights)
    mz = res.mean_zero
    for lev in ellipse_levels():
        assert np.min(np.abs(mz - lev)) < 1e-10
        assert np.min(np.abs(mz + lev)) < 1e-10
    assert res.plemelj_residual < 1e-12


def test_square_plemelj_and_radius(square_ops):
    mesh, ops = square_ops
    res = symmetrized_spectrum(ops.Kmat, ops.Smat, ops.weights)
    assert res.plemelj_residual < 1e-4
    assert abs(res.spectral_radius - 0.5) < 0.02


@settings(deadline=None, max_examples=50)
@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=20))
def test_pairing_residual_symmetric_sets(xs):
    v = np.concatenate([xs, -np.asarray(xs)])
    assert pairing_residual(v) == 0.0
    assert pairing_residual(np.append(v, 2.0)) >= 2.0 - max(xs) - 1e-12


def test_pairing_residual_floor():
    assert pairing_residual(np.array([0.5, -0.5, 1e-3]), floor=1e-2) == 0.0
    assert pairing_residual(np.array([0.5, -0.4])) == pytest.approx(0.1)


def test_poincare_quotient_bounded_by_radius(ellipse_ops, rng):
    mesh, ops = ellipse_ops
    res = symmetrized_spectrum(ops.Kmat, ops.Smat, ops.weights, keep_vectors=True)
    for _ in range(20):
        g = mean_free(rng.standard_normal(mesh.n), ops.weights)
        q = poincare_quotient(ops.Kmat, ops.Smat, ops.weights, g)
        assert abs(q.quotient) <= res.spectral_radius + 1e-12
        assert q.exterior_energy > 0 and q.interior_energy > 0
    k = int(np.argmax(np.where(np.isclose(res.eigenvalues, res.constant_eigenvalue), -1,
                               res.eigenvalues)))
    top = poincare_quotient(ops.Kmat, ops.Smat, ops.weights, res.vectors[:, k])
    assert top.quotient == pytest.approx(res.eigenvalues[k], abs=1e-12)


def test_equilibrium_density_ellipse(ellipse_ops):
    mesh, ops = ellipse_ops
    eq = equilibrium_density(ops.Kmat, ops.weights, ops.Smat)
    assert eq.potential_spread < 1e-10
    assert np.all(eq.density > 0)


def test_jump_relations_circle():
    m = geometry.build_boundary_mesh(geometry.disk(0.4), n_nodes=256)
    th = 2 * math.pi * m.params
    rep = jump_test(m, np.cos(3 * th), np.sin(2 * th) + 0.3)
    assert rep.max_residual < 1e-6


def test_double_layer_of_one():
    m = _circle(0.4, 128)
    vals = layerpot.eval_double_layer(m, np.ones(m.n), np.array([0.1j, 1.0 + 0j]))
    assert vals == pytest.approx([-1.0, 0.0], abs=1e-12)


def test_spectrum_roundtrip():
    res = nystrom_spectrum(_circle(0.4, 64))
    back = SpectrumResult.from_dict(res.to_dict(seed=3))
    assert np.array_equal(back.eigenvalues, res.eigenvalues)
    assert res.to_dict(seed=3)["seed"] == 3
    assert res.to_csv().splitlines()[0] == "eigenvalue"
