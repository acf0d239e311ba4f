"""Nystrom discretization of the layer potentials of the Laplacian in 2D.

Kernel normalization: G(x, y) = -(1 / 2 pi) log|x - y|, so that

    K f(x) = (1/pi) int <n_y, y - x> / |y - x|^2 f(y) dsigma(y),   K 1 = 1,
    S g(x) = int G(x, y) g(y) dsigma(y),
    D f(x) = int d_{n_y} G(x, y) f(y) dsigma(y)   (x off the boundary).

Matrices act on nodal values: (Kmat @ f)_i ~ K f(x_i). With W = diag(weights)
the discrete adjoint is K*mat = W^-1 Kmat^T W.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._quadrature import gauss_legendre, graded_rule, lagrange_matrix, log_self_weights
from .geometry import BoundaryMesh, Panel

SCHEMA = "np-spectra/1"
NEAR_FACTOR = 2.5
ASYMMETRY_WARN = 1e-6


class AssemblyError(RuntimeError):
    pass


class CapacityError(RuntimeError):
    """Single layer matrix not positive definite: rescale the domain."""


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def _k_kernel(x, y, ny):
    d = y - x
    return np.real(np.conj(ny) * d) / (np.abs(d) ** 2 * np.pi)


def _s_kernel(x, y):
    return -np.log(np.abs(y - x)) / (2.0 * np.pi)


# ---------------------------------------------------------------------------
# near-field product integration on Gauss panels
# ---------------------------------------------------------------------------


def _panel_geometry(mesh: BoundaryMesh):
    centers = np.empty(len(mesh.panels), dtype=complex)
    radii = np.empty(len(mesh.panels))
    for k, p in enumerate(mesh.panels):
        e = mesh.domain.edges[p.edge]
        pts = e.point(np.linspace(p.t0, p.t1, 9))
        c = complex(e.point(0.5 * (p.t0 + p.t1)))
        centers[k] = c
        radii[k] = np.abs(pts - c).max()
    return centers, radii


def _near_pairs(mesh: BoundaryMesh, factor: float = NEAR_FACTOR):
    """Yield (panel, target indices) for off-panel targets close to each panel."""
    centers, radii = _panel_geometry(mesh)
    for k, p in enumerate(mesh.panels):
        dist = np.abs(mesh.nodes - centers[k])
        near = np.nonzero(dist < factor * radii[k])[0]
        near = near[(near < p.start) | (near >= p.start + p.order)]
        if near.size:
            yield p, near


def _closest_reference(edge, p: Panel, x: complex):
    s = np.linspace(-1.0, 1.0, 65)
    half = 0.5 * (p.t1 - p.t0)
    mid = 0.5 * (p.t1 + p.t0)
    y = edge.point(mid + half * s)
    j = int(np.argmin(np.abs(y - x)))
    # arclength per unit reference coordinate, for the distance in reference units
    scale = float(np.abs(edge.d1(mid + half * s[j]))) * half
    return s[j], abs(y[j] - x) / scale


def _product_weights(edge, p: Panel, x: complex, kernels):
    """Weights w[k] with int_panel kernel(x, y) phi(y) dsigma ~ sum_k w[k] phi(y_k)."""
    sstar, dist = _closest_reference(edge, p, x)
    s, ws = graded_rule(sstar, dist, p.order)
    half = 0.5 * (p.t1 - p.t0)
    t = 0.5 * (p.t1 + p.t0) + half * s
    y = edge.point(t)
    dy = edge.d1(t)
    sp = np.abs(dy)
    ny = -1j * dy / sp
    L = lagrange_matrix(p.order, s)
    base = ws * half * sp
    return [(base * kern(x, y, ny)) @ L for kern in kernels]


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _check_distinct(mesh: BoundaryMesh):
    z = mesh.nodes
    order = np.lexsort((z.imag, z.real))
    zs = z[order]
    gap = np.abs(np.diff(zs))
    if np.any(gap == 0.0):
        raise AssemblyError("two distinct quadrature nodes coincide")


def assemble_K(mesh: BoundaryMesh) -> np.ndarray:
    """Nystrom matrix of K; diagonal from the curvature limit kappa / (2 pi)."""
    _check_distinct(mesh)
    x = mesh.nodes
    d = x[None, :] - x[:, None]
    np.fill_diagonal(d, 1.0)
    Kmat = np.real(np.conj(mesh.normals)[None, :] * d) / (np.abs(d) ** 2 * np.pi)
    Kmat *= mesh.weights[None, :]
    np.fill_diagonal(Kmat, mesh.curvature * mesh.weights / (2.0 * np.pi))
    if mesh.rule == "gauss":
        kern = lambda xx, y, ny: _k_kernel(xx, y, ny)  # noqa: E731
        for p, targets in _near_pairs(mesh):
            e = mesh.domain.edges[p.edge]
            cols = slice(p.start, p.start + p.order)
            for i in targets:
                Kmat[i, cols] = _product_weights(e, p, x[i], [kern])[0]
    return Kmat


def _kress_weights(n: int) -> np.ndarray:
    """Circulant weights R_j for int_0^{2pi} log(4 sin^2((t_i - t)/2)) f(t) dt."""
    if n % 2:
        raise ValueError("the Kress log rule needs an even node count")
    h = n // 2
    j = np.arange(n)
    t = np.pi * j / h
    m = np.arange(1, h)
    R = -(2 * np.pi / h) * (np.cos(np.outer(t, m)) / m).sum(axis=1) \
        - (np.pi / h**2) * np.cos(h * t)
    return R


def assemble_S(mesh: BoundaryMesh, check_capacity: bool = True):
    """Nystrom matrix of S with log-corrected self and near interactions.

    Returns (Smat, asymmetry) where W Smat has been symmetrized and
    ``asymmetry`` is the relative Frobenius asymmetry removed.
    """
    if check_capacity:
        r = np.abs(mesh.nodes).max()
        if r > 0.5 + 1e-12:
            raise CapacityError(
                f"boundary reaches |x| = {r:.3g} > 1/2; apply geometry.rescale_to_normal first")
    _check_distinct(mesh)
    x = mesh.nodes
    n = mesh.n
    d = np.abs(x[None, :] - x[:, None])
    np.fill_diagonal(d, 1.0)
    if mesh.rule == "trapezoid":
        R = _kress_weights(n)
        idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
        Rm = R[idx]
        theta = 2 * np.pi * mesh.params
        dth = theta[None, :] - theta[:, None]
        sin2 = 4.0 * np.sin(0.5 * dth) ** 2
        np.fill_diagonal(sin2, 1.0)
        speed_theta = mesh.speed / (2 * np.pi)
        Lsm = np.log(d**2 / sin2)
        np.fill_diagonal(Lsm, np.log(speed_theta**2))
        Smat = -(Rm + (2 * np.pi / n) * Lsm) * speed_theta[None, :] / (4 * np.pi)
    else:
        Smat = -np.log(d) / (2 * np.pi) * mesh.weights[None, :]
        for p in mesh.panels:
            e = mesh.domain.edges[p.edge]
            sl = slice(p.start, p.start + p.order)
            xg, wg = gauss_legendre(p.order)
            half = 0.5 * (p.t1 - p.t0)
            sp = mesh.speed[sl] * half  # arclength per unit reference coordinate
            Wlog = log_self_weights(p.order)
            xs = x[sl]
            dd = np.abs(xs[:, None] - xs[None, :])
            ds = np.abs(xg[:, None] - xg[None, :])
            np.fill_diagonal(ds, 1.0)
            np.fill_diagonal(dd, 1.0)
            smooth = np.log(dd / ds)
            np.fill_diagonal(smooth, np.log(sp))
            block = -(Wlog + wg[None, :] * smooth) * sp[None, :] / (2 * np.pi)
            Smat[sl, sl] = block
        kern = lambda xx, y, ny: _s_kernel(xx, y)  # noqa: E731
        for p, targets in _near_pairs(mesh):
            e = mesh.domain.edges[p.edge]
            cols = slice(p.start, p.start + p.order)
            for i in targets:
                Smat[i, cols] = _product_weights(e, p, x[i], [kern])[0]
    A = mesh.weights[:, None] * Smat
    asym = float(np.linalg.norm(A - A.T) / np.linalg.norm(A))
    A = 0.5 * (A + A.T)
    Smat = A / mesh.weights[:, None]
    return Smat, asym


def discrete_adjoint(Kmat: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """K*mat = W^-1 Kmat^T W, the adjoint in the discrete L2(weights) pairing."""
    return (Kmat.T * weights[None, :]) / weights[:, None]


def plemelj_residual(Kmat, Smat, weights) -> float:
    """||K S - S K*||_F / ||S||_F."""
    Ks = discrete_adjoint(Kmat, weights)
    return float(np.linalg.norm(Kmat @ Smat - Smat @ Ks) / np.linalg.norm(Smat))


@dataclass(frozen=True, eq=False)
class OperatorMatrices:
    Kmat: np.ndarray
    Smat: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def Kstar(self) -> np.ndarray:
        return discrete_adjoint(self.Kmat, self.weights)


def assemble_operators(mesh: BoundaryMesh) -> OperatorMatrices:
    Kmat = assemble_K(mesh)
    Smat, asym = assemble_S(mesh)
    meta = dict(mesh.meta, s_asymmetry=asym)
    return OperatorMatrices(Kmat, Smat, mesh.weights, meta)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


@dataclass
class SpectrumResult:
    """Real spectrum of a discretized Fredholm-eigenvalue problem.

    ``eigenvalues`` is sorted descending and holds the full finite spectrum;
    for the Nystrom method the eigenvalue of the constant sector (near 1) is
    kept there and flagged by ``constant_eigenvalue``; ``spectral_radius``
    is taken over the mean-zero sector only.
    """

    eigenvalues: np.ndarray
    spectral_radius: float
    pairing_residual: float
    method: str
    n_nodes: int
    plemelj_residual: float | None = None
    asymmetry_residual: float = 0.0
    constant_eigenvalue: float | None = None
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    vectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean_zero(self) -> np.ndarray:
        ev = self.eigenvalues
        if self.constant_eigenvalue is None:
            return ev
        k = int(np.argmin(np.abs(ev - self.constant_eigenvalue)))
        return np.delete(ev, k)

    def histogram(self, bins: int = 40, lo: float = -1.0, hi: float = 1.0):
        counts, edges = np.histogram(self.mean_zero, bins=bins, range=(lo, hi))
        return counts, edges

    def to_dict(self, seed: int | None = None) -> dict:
        out = {
            "schema": SCHEMA,
            "method": self.method,
            "n_nodes": int(self.n_nodes),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "spectral_radius": float(self.spectral_radius),
            "pairing_residual": float(self.pairing_residual),
            "plemelj_residual": None if self.plemelj_residual is None else float(self.plemelj_residual),
            "asymmetry_residual": float(self.asymmetry_residual),
            "constant_eigenvalue": None if self.constant_eigenvalue is None else float(self.constant_eigenvalue),
            "warnings": list(self.warnings),
            "meta": self.meta,
        }
        if seed is not None:
            out["seed"] = seed
        return out

    def to_json(self, seed: int | None = None) -> str:
        return json.dumps(self.to_dict(seed), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["eigenvalue"] + [repr(float(v)) for v in self.eigenvalues]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "SpectrumResult":
        return cls(np.asarray(doc["eigenvalues"], dtype=float), doc["spectral_radius"],
                   doc["pairing_residual"], doc["method"], doc["n_nodes"],
                   doc.get("plemelj_residual"), doc.get("asymmetry_residual", 0.0),
                   doc.get("constant_eigenvalue"), list(doc.get("warnings", [])),
                   dict(doc.get("meta", {})))


def pairing_residual(values: np.ndarray, floor: float = 0.0) -> float:
    """max over |lam| > floor of the distance from -lam to the set ``values``."""
    v = np.sort(np.asarray(values, dtype=float))
    big = v[np.abs(v) > floor]
    if big.size == 0:
        return 0.0
    pos = np.searchsorted(v, -big)
    lo = np.clip(pos - 1, 0, len(v) - 1)
    hi = np.clip(pos, 0, len(v) - 1)
    dist = np.minimum(np.abs(v[lo] + big), np.abs(v[hi] + big))
    return float(dist.max())


@dataclass(frozen=True, eq=False)
class _Symmetrized:
    L: np.ndarray
    M: np.ndarray
    asym: float


def _symmetrize(Kmat, Smat, weights) -> _Symmetrized:
    A = weights[:, None] * Smat
    A = 0.5 * (A + A.T)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise CapacityError(
            "W S is not positive definite; rescale the domain into |z| < 1/2") from exc
    Ks = discrete_adjoint(Kmat, weights)
    B = A @ Ks
    X = sla.solve_triangular(L, B, lower=True)
    M = sla.solve_triangular(L, X.T, lower=True).T
    asym = float(np.linalg.norm(M - M.T) / np.linalg.norm(M))
    return _Symmetrized(L, 0.5 * (M + M.T), asym)


def symmetrized_spectrum(Kmat, Smat, weights, drop_constant: bool = True,
                         keep_vectors: bool = False) -> SpectrumResult:
    """Eigenvalues of K* made symmetric through the single layer inner product.

    With A = W Smat = L L^T, the matrix M = L^-1 (A K*mat) L^-T is similar
    to K*mat and symmetric up to the discrete Plemelj defect. The eigenvector
    whose density has the largest mean (the equilibrium density) is the
    constant sector; it is excluded from the spectral radius.
    """
    sym = _symmetrize(Kmat, Smat, weights)
    lam, V = np.linalg.eigh(sym.M)
    G = sla.solve_triangular(sym.L.T, V, lower=False)
    corr = np.abs(weights @ G)
    kc = int(np.argmax(corr))
    warn = []
    if sym.asym > ASYMMETRY_WARN:
        warn.append(f"symmetrization residual {sym.asym:.3e} exceeds {ASYMMETRY_WARN:g}")
    mz = np.delete(lam, kc) if drop_constant else lam
    radius = float(np.abs(mz).max()) if mz.size else 0.0
    pres = pairing_residual(mz, 3.0 * sym.asym)
    order = np.argsort(lam)[::-1]
    res = SpectrumResult(
        eigenvalues=lam[order], spectral_radius=radius, pairing_residual=pres,
        method="nystrom", n_nodes=len(weights),
        plemelj_residual=plemelj_residual(Kmat, Smat, weights),
        asymmetry_residual=sym.asym,
        constant_eigenvalue=float(lam[kc]) if drop_constant else None,
        warnings=warn,
        meta={"constant_correlation": float(corr[kc] / max(np.delete(corr, kc).max(initial=0.0), 1e-300))},
    )
    if keep_vectors:
        res.vectors = G[:, order]
    return res


def nystrom_spectrum(mesh: BoundaryMesh, keep_vectors: bool = False) -> SpectrumResult:
    ops = assemble_operators(mesh)
    res = symmetrized_spectrum(ops.Kmat, ops.Smat, ops.weights, keep_vectors=keep_vectors)
    res.meta.update({k: v for k, v in mesh.meta.items()})
    res.meta["s_asymmetry"] = ops.meta["s_asymmetry"]
    res.meta["domain"] = mesh.domain.kind
    return res


# ---------------------------------------------------------------------------
# Poincare quotient and equilibrium density
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoincareQuotient:
    quotient: float
    exterior_energy: float
    interior_energy: float


def poincare_quotient(Kmat, Smat, weights, g) -> PoincareQuotient:
    """<K*g, Sg>_W / <g, Sg>_W and the energies <(g -+ K*g)/2, Sg>_W.

    The exterior energy is <(g + K*g)/2, Sg> and the interior energy
    <(g - K*g)/2, Sg>, so the quotient equals (E_ext - E_int) / (E_ext + E_int).
    """
    g = np.asarray(g, dtype=float)
    A = weights[:, None] * Smat
    A = 0.5 * (A + A.T)
    Ks = discrete_adjoint(Kmat, weights)
    gSg = float(g @ A @ g)
    if gSg <= 0:
        raise CapacityError("<g, Sg> <= 0: the domain is not normal; rescale it")
    Sg = A @ g
    kg = float((Ks @ g) @ Sg)
    e_ext = 0.5 * (gSg + kg)
    e_int = 0.5 * (gSg - kg)
    return PoincareQuotient(kg / gSg, e_ext, e_int)


def mean_free(g, weights) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return g - (weights @ g) / weights.sum()


@dataclass(frozen=True)
class EquilibriumDensity:
    density: np.ndarray
    potential_spread: float
    singular_gap: float


def equilibrium_density(Kmat, weights, Smat=None) -> EquilibriumDensity:
    """Unit-norm null vector of I - K*mat (smallest right singular vector).

    If Smat is given, ``potential_spread`` is the relative spread of Smat g0
    over the boundary nodes (zero for the exact equilibrium density).
    """
    Ks = discrete_adjoint(Kmat, weights)
    _, s, Vt = np.linalg.svd(np.eye(len(weights)) - Ks)
    g0 = Vt[-1]
    if weights @ g0 < 0:
        g0 = -g0
    gap = float(s[-2] / max(s[-1], 1e-300))
    if gap < 1e3:
        warnings.warn(f"smallest singular value of I - K* not isolated (ratio {gap:.3g})")
    spread = math.nan
    if Smat is not None:
        u = Smat @ g0
        spread = float((u.max() - u.min()) / abs(u.mean()))
    return EquilibriumDensity(g0, spread, gap)


# ---------------------------------------------------------------------------
# off-boundary potentials and jump relations
# ---------------------------------------------------------------------------


def refine_mesh(mesh: BoundaryMesh, factor: int):
    """Finer quadrature on the same geometry plus an interpolation operator.

    Returns (fine_mesh, interp) with interp(density) giving nodal values of the
    interpolated density on the fine mesh.
    """
    from .geometry import _assemble_mesh

    if factor == 1:
        return mesh, lambda f: np.asarray(f)
    if mesh.rule == "trapezoid":
        n = mesh.n
        nf = n * factor
        t = np.arange(nf) / nf
        fine = _assemble_mesh(mesh.domain, t, np.full(nf, 1.0 / nf), np.zeros(nf, dtype=int),
                              (), np.array([0, nf]), "trapezoid", dict(mesh.meta))

        def interp(f):
            F = np.fft.fft(np.asarray(f, dtype=float))
            G = np.zeros(nf, dtype=complex)
            h = n // 2
            G[:h] = F[:h]
            G[-h + 1:] = F[-h + 1:]
            G[h] = 0.5 * F[h]
            G[-h] = 0.5 * F[h]
            return np.real(np.fft.ifft(G)) * factor

        return fine, interp
    xg, wg = gauss_legendre(mesh.panels[0].order)
    ts, ws, eidx, panels, blocks = [], [], [], [], []
    start = 0
    sub = np.linspace(-1.0, 1.0, factor + 1)
    for p in mesh.panels:
        half = 0.5 * (p.t1 - p.t0)
        mid = 0.5 * (p.t1 + p.t0)
        for k in range(factor):
            a, b = sub[k], sub[k + 1]
            s = 0.5 * (a + b) + 0.5 * (b - a) * xg
            ts.append(mid + half * s)
            ws.append(half * 0.5 * (b - a) * wg)
            eidx.append(np.full(p.order, p.edge))
            t0, t1 = mid + half * a, mid + half * b
            panels.append(Panel(p.edge, t0, t1, p.level, p.order, start))
            start += p.order
        s_all = np.concatenate([0.5 * (sub[k] + sub[k + 1]) + 0.5 * (sub[k + 1] - sub[k]) * xg
                                for k in range(factor)])
        blocks.append(lagrange_matrix(p.order, s_all))
    fine = _assemble_mesh(mesh.domain, np.concatenate(ts), np.concatenate(ws),
                          np.concatenate(eidx), tuple(panels), mesh.vertex_offsets * factor,
                          "gauss", dict(mesh.meta))
    P = sla.block_diag(*blocks)
    return fine, lambda f: P @ np.asarray(f)


def _distance_check(mesh: BoundaryMesh, points, h_min):
    pts = np.asarray(points, dtype=complex).ravel()
    spacing = mesh.node_spacing()
    for k, z in enumerate(pts):
        dist = np.abs(mesh.nodes - z)
        j = int(np.argmin(dist))
        if dist[j] < h_min * spacing[j]:
            warnings.warn(f"evaluation point {z:.6g} lies {dist[j]:.3g} from the boundary "
                          f"(< {h_min} local node spacings); quadrature may be inaccurate")
            return


def eval_single_layer(mesh: BoundaryMesh, density, points, h_min: float = 3.0, chunk: int = 2048):
    """S density at points off the boundary by direct quadrature."""
    pts = np.asarray(points, dtype=complex)
    _distance_check(mesh, pts, h_min)
    q = mesh.weights * np.asarray(density, dtype=float)
    flat = pts.ravel()
    out = np.empty(flat.shape)
    for k in range(0, len(flat), chunk):
        z = flat[k:k + chunk]
        out[k:k + chunk] = -np.log(np.abs(z[:, None] - mesh.nodes[None, :])) @ q / (2 * np.pi)
    return out.reshape(pts.shape)


def eval_double_layer(mesh: BoundaryMesh, density, points, h_min: float = 3.0, chunk: int = 2048):
    """D density at points off the boundary; D1 = -1 inside, 0 outside."""
    pts = np.asarray(points, dtype=complex)
    _distance_check(mesh, pts, h_min)
    q = mesh.weights * np.asarray(density, dtype=float)
    flat = pts.ravel()
    out = np.empty(flat.shape)
    for k in range(0, len(flat), chunk):
        z = flat[k:k + chunk]
        d = mesh.nodes[None, :] - z[:, None]
        ker = -np.real(np.conj(mesh.normals)[None, :] * d) / (np.abs(d) ** 2 * 2 * np.pi)
        out[k:k + chunk] = ker @ q
    return out.reshape(pts.shape)


@dataclass(frozen=True)
class JumpReport:
    d_interior: float
    d_exterior: float
    s_interior: float
    s_exterior: float
    nodes_used: int

    @property
    def max_residual(self) -> float:
        return max(self.d_interior, self.d_exterior, self.s_interior, self.s_exterior)


def _extrapolate_to_zero(h: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Polynomial extrapolation of vals[k, i] sampled at offsets h[k] * spacing_i."""
    n = len(h)
    w = np.empty(n)
    for k in range(n):
        others = np.delete(h, k)
        w[k] = np.prod(others / (others - h[k]))
    return w @ vals


def jump_test(mesh: BoundaryMesh, f, g, ops: OperatorMatrices | None = None,
              upsample: int = 8, offsets=(1.0, 1.5, 2.0, 2.5, 3.0, 3.5),
              fd_step: float = 0.05) -> JumpReport:
    """Check the four jump relations for D g and the normal derivatives of S f.

    Potentials are sampled along interior/exterior normal segments at
    ``offsets`` times the local node spacing (evaluated on an ``upsample``-times
    finer quadrature) and extrapolated to the boundary. Nodes whose normal
    segment comes close to a vertex are skipped. Residuals are relative to the
    max-norm of the data.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if ops is None:
        ops = assemble_operators(mesh)
    fine, interp = refine_mesh(mesh, upsample)
    gf, ff = interp(g), interp(f)
    h = np.asarray(offsets, dtype=float)
    spacing = mesh.node_spacing()
    x, nrm = mesh.nodes, mesh.normals
    keep = np.ones(mesh.n, dtype=bool)
    verts = np.asarray(mesh.domain.vertices, dtype=complex)
    reach = (h.max() + fd_step) * spacing
    if verts.size:
        dv = np.abs(x[:, None] - verts[None, :]).min(axis=1)
        keep &= dv > 4.0 * reach
    idx = np.nonzero(keep)[0]
    sp = spacing[idx]
    xi, ni = x[idx], nrm[idx]
    hm = h[:, None] * sp[None, :]
    h_min = 0.5 * upsample * h.min()

    def d_on(side):
        pts = xi[None, :] + side * hm * ni[None, :]
        return _extrapolate_to_zero(h, eval_double_layer(fine, gf, pts, h_min=h_min))

    def dn_s(side):
        # fourth-order central difference of S f along the normal
        st = fd_step * sp[None, :]
        base = xi[None, :] + side * hm * ni[None, :]
        u = lambda k: eval_single_layer(fine, ff, base + k * st * ni[None, :], h_min=h_min)  # noqa: E731
        deriv = (-u(2) + 8 * u(1) - 8 * u(-1) + u(-2)) / (12 * st)
        return _extrapolate_to_zero(h, deriv)

    Kg = (ops.Kmat @ g)[idx]
    Ksf = (ops.Kstar @ f)[idx]
    gi, fi = g[idx], f[idx]
    gn = max(np.abs(g).max(), 1e-300)
    fn = max(np.abs(f).max(), 1e-300)
    if not np.any(g):
        d_int = d_ext = 0.0
    else:
        d_int = float(np.abs(d_on(-1.0) + 0.5 * (gi + Kg)).max() / gn)
        d_ext = float(np.abs(d_on(1.0) - 0.5 * (gi - Kg)).max() / gn)
    if not np.any(f):
        s_int = s_ext = 0.0
    else:
        s_int = float(np.abs(dn_s(-1.0) - 0.5 * (fi - Ksf)).max() / fn)
        s_ext = float(np.abs(dn_s(1.0) - 0.5 * (-fi - Ksf)).max() / fn)
    return JumpReport(d_int, d_ext, s_int, s_ext, int(idx.size))
