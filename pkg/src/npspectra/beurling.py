"""Galerkin matrix of the conjugated Beurling-type operator on a polynomial Bergman basis.

For a polynomial p, Stokes' theorem turns the area principal value into a
contour integral with an integrand that is smooth for interior z:

    T p(z) = (i / 2 pi) oint p(zeta) / (conj(zeta) - conj(z)) dzeta.

The operator f -> conj(T f) is real-linear and symmetric, so in an
orthonormal basis it is represented by c -> G conj(c) with G complex
symmetric. If G = U diag(s) U^T (Takagi), then G conj(U e_k) = s_k U e_k and
G conj(i U e_k) = -s_k (i U e_k): the real-linear eigenvalues are exactly
+-s_k, the singular values of G.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import shapely

from ._quadrature import gauss_legendre, graded_rule
from .bergman import (CoeffMatrix, boundary_moments, evaluate_basis, orthonormal_basis)
from .conformal import MobiusMap, mobius_apply
from .geometry import (AreaQuadrature, BoundaryMesh, DomainSpec, build_area_quadrature,
                       build_boundary_mesh, rescale_to_normal)
from .layerpot import SpectrumResult, pairing_residual

NEAR_RATIO = 1.2            # targets within this many panel half-lengths are refined
ADAPT_TOL = 1e-10
MAX_LEVELS = 12
UNIFORM_LEVELS = 4          # deeper refinement switches to per-target graded rules
SYMMETRY_WARN = 1e-3
SYMMETRY_FAIL = 1e-2


class BeurlingError(RuntimeError):
    pass


class PointLocationError(ValueError):
    pass


def _check_interior(d: DomainSpec, z: np.ndarray) -> None:
    ring = d.sample(1000)
    poly = shapely.Polygon(np.column_stack([ring.real, ring.imag]))
    inside = shapely.contains_xy(poly, z.real, z.imag)
    if not inside.all():
        bad = z[~inside][0]
        raise PointLocationError(f"point {bad} is on or outside the boundary")


def _panel_data(mesh: BoundaryMesh):
    half = np.array([mesh.weights[p.start:p.start + p.order].sum() / 2 for p in mesh.panels])
    centers = np.array([complex(mesh.domain.edges[p.edge].point(0.5 * (p.t0 + p.t1)))
                        for p in mesh.panels])
    return half, centers


def _closest(edge, p, z):
    s = np.linspace(-1.0, 1.0, 129)
    half = 0.5 * (p.t1 - p.t0)
    mid = 0.5 * (p.t1 + p.t0)
    y = edge.point(mid + half * s)
    j = int(np.argmin(np.abs(y - z)))
    scale = float(np.abs(edge.d1(mid + half * s[j]))) * half
    return s[j], abs(y[j] - z) / scale


def _panel_integral(edge, p, z: complex, Cm: np.ndarray, tol: float):
    """(i/2pi) int_panel e(zeta) / conj(zeta - z) dzeta on graded rules of growing depth."""
    sstar, dist = _closest(edge, p, z)
    half = 0.5 * (p.t1 - p.t0)
    mid = 0.5 * (p.t1 + p.t0)
    prev = None
    for lev in range(MAX_LEVELS + 1):
        s, ws = graded_rule(sstar, dist / 2**lev, p.order)
        t = mid + half * s
        y = edge.point(t)
        dy = edge.d1(t) * (ws * half)
        vals = evaluate_basis(Cm, y)
        cur = (1j / (2 * math.pi)) * ((dy / np.conj(y - z)) @ vals)
        if prev is not None and np.abs(cur - prev).max() <= tol * max(1.0, np.abs(cur).max()):
            return cur, lev
        prev = cur
    return cur, MAX_LEVELS + 1


def _uniform_panel(edge, p, level: int, zs: np.ndarray, Cm: np.ndarray) -> np.ndarray:
    """Panel integral for several targets on 2^level equal Gauss subpanels."""
    x, w = gauss_legendre(p.order)
    m = 2**level
    b = np.linspace(p.t0, p.t1, m + 1)
    hh = 0.5 * (b[1:] - b[:-1])
    t = (0.5 * (b[1:] + b[:-1])[:, None] + hh[:, None] * x[None, :]).ravel()
    tw = (hh[:, None] * w[None, :]).ravel()
    y = edge.point(t)
    dy = edge.d1(t) * tw
    vals = evaluate_basis(Cm, y)
    return (1j / (2 * math.pi)) * ((dy[None, :] / np.conj(y[None, :] - zs[:, None])) @ vals)


def contour_T_apply(mesh: BoundaryMesh, C: CoeffMatrix, k=None, points=None,
                    tol: float = ADAPT_TOL, check: bool = True, chunk: int = 4096):
    """Values of T e_k at interior points, as a (len(points), len(k)) array.

    ``k`` may be an index, a sequence of indices, or None for every basis
    function. For points within ``NEAR_RATIO`` panel half-lengths of a panel,
    that panel is split into equal subpanels no longer than the distance, and
    the result is accepted when one more halving changes it by at most
    ``tol``; otherwise (or for very close points) a rule graded toward the
    nearest boundary point is deepened until two depths agree to ``tol``.

    Raises
    ------
    PointLocationError
        If a point is not strictly inside the domain.
    """
    if mesh.rule != "gauss":
        raise ValueError("contour_T_apply needs a Gauss-panel boundary mesh")
    z = np.atleast_1d(np.asarray(points, dtype=complex)).ravel()
    if check:
        _check_interior(mesh.domain, z)
    scalar_k = np.ndim(k) == 0 and k is not None
    cols = np.arange(C.size) if k is None else np.atleast_1d(k)
    Cm = C.C[cols]
    P = evaluate_basis(Cm, mesh.nodes)
    dz = mesh.tangents * mesh.weights
    out = np.empty((z.size, len(cols)), dtype=complex)
    for a in range(0, z.size, chunk):
        zz = z[a:a + chunk]
        kern = dz[None, :] / np.conj(mesh.nodes[None, :] - zz[:, None])
        out[a:a + chunk] = (1j / (2 * math.pi)) * (kern @ P)
    half, centers = _panel_data(mesh)
    unconverged = 0
    for pi_, p in enumerate(mesh.panels):
        near = np.nonzero(np.abs(z - centers[pi_]) < (1.0 + NEAR_RATIO) * half[pi_])[0]
        if near.size == 0:
            continue
        edge = mesh.domain.edges[p.edge]
        sl = slice(p.start, p.start + p.order)
        zn = z[near]
        coarse = (1j / (2 * math.pi)) * ((dz[sl][None, :] / np.conj(mesh.nodes[sl][None, :]
                                                                      - zn[:, None])) @ P[sl])
        dist = np.abs(edge.point(np.linspace(p.t0, p.t1, 65))[None, :] - zn[:, None]).min(axis=1)
        # subpanel half-length at most the target distance
        lev = np.ceil(np.log2(np.maximum(half[pi_] / np.maximum(dist, 1e-300), 1.0))).astype(int)
        lev = np.maximum(lev, 1)
        fine = np.empty_like(coarse)
        todo = []
        for L in np.unique(lev):
            grp = np.nonzero(lev == L)[0]
            if L > UNIFORM_LEVELS:
                todo.extend(grp)
                continue
            a = _uniform_panel(edge, p, L, zn[grp], Cm)
            b = _uniform_panel(edge, p, L + 1, zn[grp], Cm)
            scale = np.maximum(1.0, np.abs(b).max(axis=1))
            ok = np.abs(a - b).max(axis=1) <= tol * scale
            fine[grp] = b
            todo.extend(grp[~ok])
        for j in todo:
            fine[j], lv = _panel_integral(edge, p, complex(zn[j]), Cm, tol)
            unconverged += lv > MAX_LEVELS
        out[near] += fine - coarse
    if unconverged:
        warnings.warn(f"{unconverged} near-boundary panel integrals did not settle to {tol:g}",
                      RuntimeWarning, stacklevel=2)
    return out[:, 0] if scalar_k else out


@dataclass(frozen=True, eq=False)
class GMatrix:
    """Complex symmetric Galerkin matrix G[j, k] = <conj(T e_k), e_j>."""

    G: np.ndarray
    symmetry_residual: float
    effective_degree: int
    meta: dict = field(default_factory=dict)


def assemble_G(mesh: BoundaryMesh, C: CoeffMatrix, quad: AreaQuadrature) -> GMatrix:
    """Galerkin matrix with T e_k from contour integrals at the area nodes.

    The symmetry residual ||G - G^T||_F / max(||G||_F, 1) is recorded before
    symmetrizing; the floor 1 is the operator-norm bound of the basis
    representation, which keeps the ratio meaningful when G vanishes.

    Raises
    ------
    BeurlingError
        If the symmetry residual exceeds 1e-2 (under-resolved quadrature).
    """
    V = evaluate_basis(C, quad.nodes)
    T = contour_T_apply(mesh, C, None, quad.nodes, check=False)
    G = np.conj((V * quad.weights[:, None]).T @ T)
    res = float(np.linalg.norm(G - G.T) / max(np.linalg.norm(G), 1.0))
    if res > SYMMETRY_FAIL:
        raise BeurlingError(f"Galerkin matrix symmetry residual {res:.3e} exceeds "
                            f"{SYMMETRY_FAIL:g}; refine the quadrature")
    meta = {"n_area_nodes": int(quad.nodes.size), "n_boundary_nodes": mesh.n}
    if res > SYMMETRY_WARN:
        meta["warning"] = f"symmetry residual {res:.3e} above {SYMMETRY_WARN:g}"
    return GMatrix(0.5 * (G + G.T), res, C.effective_degree, meta)


def takagi_spectrum(G: GMatrix | np.ndarray) -> SpectrumResult:
    """Real-linear spectrum {+-s_k} of c -> G conj(c) from the singular values of G."""
    Gm = G.G if isinstance(G, GMatrix) else np.asarray(G, dtype=complex)
    s = np.linalg.svd(Gm, compute_uv=False) if Gm.size else np.zeros(0)
    ev = np.sort(np.concatenate([s, -s]))[::-1]
    warn = []
    meta = {}
    if isinstance(G, GMatrix):
        meta = dict(G.meta, symmetry_residual=G.symmetry_residual,
                    effective_degree=G.effective_degree)
        if "warning" in G.meta:
            warn.append(G.meta["warning"])
    return SpectrumResult(
        eigenvalues=ev, spectral_radius=float(s.max()) if s.size else 0.0,
        pairing_residual=pairing_residual(ev), method="bergman",
        n_nodes=int(meta.get("n_area_nodes", Gm.shape[0])),
        asymmetry_residual=float(meta.get("symmetry_residual", 0.0)),
        warnings=warn, meta=meta)


@dataclass(frozen=True)
class BergmanConfig:
    degree: int = 24
    radial_order: int = 24
    panels_per_edge: int = 8
    grading_levels: int = 8
    quad_order: int = 16
    cond_cap: float = 1e12


def bergman_spectrum(d: DomainSpec, cfg: BergmanConfig = BergmanConfig(),
                     rescale: bool = True) -> SpectrumResult:
    """End-to-end Bergman pipeline: moments, basis, Galerkin matrix, Takagi spectrum."""
    if rescale:
        d = rescale_to_normal(d)
    mesh = build_boundary_mesh(d, panels_per_edge=cfg.panels_per_edge,
                               grading_levels=cfg.grading_levels,
                               quad_order=cfg.quad_order, rule="gauss")
    quad = build_area_quadrature(d, radial_order=cfg.radial_order, mesh=mesh)
    C = orthonormal_basis(boundary_moments(mesh, cfg.degree), cfg.cond_cap)
    res = takagi_spectrum(assemble_G(mesh, C, quad))
    res.meta.update({"domain": d.kind, "degree": cfg.degree,
                     "radial_order": cfg.radial_order, **mesh.meta,
                     "orthonormality_defect": C.meta["orthonormality_defect"]})
    return res


def mobius_invariance_check(d: DomainSpec, L: MobiusMap,
                            cfg: BergmanConfig = BergmanConfig(), top: int = 10) -> float:
    """Max deviation of the sorted top singular values for d and L(d).

    Raises
    ------
    MobiusError
        If the pole of L lies in the closed domain.
    """
    img = mobius_apply(L, d)
    s0 = bergman_spectrum(d, cfg).eigenvalues
    s1 = bergman_spectrum(img, cfg).eigenvalues
    a = np.sort(s0[s0 >= 0])[::-1][:top]
    b = np.sort(s1[s1 >= 0])[::-1][:top]
    m = min(a.size, b.size)
    return float(np.abs(a[:m] - b[:m]).max()) if m else 0.0


def exterior_image(d: DomainSpec, z0: complex | None = None) -> DomainSpec:
    """Bounded image of the exterior of d under z -> 1 / (z - z0), z0 inside d."""
    z0 = d.anchor if z0 is None else complex(z0)
    return mobius_apply(MobiusMap.inversion(z0), d, exterior=True)


def exterior_spectrum_surrogate(d: DomainSpec, z0: complex | None = None,
                                method: str = "bergman", cfg=None) -> SpectrumResult:
    """Spectrum of the exterior domain through its bounded Mobius image.

    ``method`` selects the pipeline used on the image: "bergman" (default) or
    "nystrom" (Fredholm eigenvalues of the image, equal by Mobius invariance).
    """
    img = rescale_to_normal(exterior_image(d, z0))
    if method == "bergman":
        res = bergman_spectrum(img, cfg or BergmanConfig(), rescale=False)
    elif method == "nystrom":
        from .layerpot import nystrom_spectrum
        kw = cfg or {}
        res = nystrom_spectrum(build_boundary_mesh(img, **kw))
    else:
        raise ValueError(f"unknown method {method!r}")
    mapped = sum(type(e).__name__ == "MappedEdge" for e in img.edges)
    res.meta.update({"surrogate_of": d.kind, "mapped_edges": mapped})
    return res
