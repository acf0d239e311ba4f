"""Orthonormal polynomial bases of the Bergman space from boundary moments.

The area moments mu[m, n] = int_Omega z^m conj(z)^n dA are reduced to contour
integrals by Stokes' theorem: with F = z^m conj(z)^(n+1) / (n+1) one has
dF/dzbar = z^m conj(z)^n, hence mu[m, n] = (1 / 2i) oint F dz.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from .geometry import AreaQuadrature, BoundaryMesh

MAX_DEGREE = 60
DEFAULT_COND_CAP = 1e12
MP_DIGITS = 32
DEFAULT_ORTHO_TOL = 1e-10


class MomentError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Complex moments mu[m, n] = int z^m conj(z)^n dA for 0 <= m, n <= max_deg + 1."""

    mu: np.ndarray
    max_deg: int
    meta: dict = field(default_factory=dict)

    @property
    def area(self) -> float:
        return float(self.mu[0, 0].real)

    def gram(self, degree: int) -> np.ndarray:
        """Gram matrix H[k, l] = <z^k, z^l> = mu[k, l] of monomials up to ``degree``."""
        return self.mu[: degree + 1, : degree + 1]

    def hermitian_defect(self) -> float:
        return float(np.abs(self.mu - self.mu.conj().T).max() / np.abs(self.mu).max())

    def to_dict(self) -> dict:
        return {"max_deg": self.max_deg,
                "real": self.mu.real.tolist(), "imag": self.mu.imag.tolist(),
                "meta": self.meta}

    @classmethod
    def from_dict(cls, doc: dict) -> "MomentTable":
        mu = np.asarray(doc["real"]) + 1j * np.asarray(doc["imag"])
        return cls(mu, int(doc["max_deg"]), dict(doc.get("meta", {})))


def boundary_moments(mesh: BoundaryMesh, max_deg: int) -> MomentTable:
    """Area moments through the contour identity, evaluated with the mesh rule.

    The raw table is made exactly Hermitian by averaging with its conjugate
    transpose; the defect removed is stored in ``meta``.
    """
    if max_deg > MAX_DEGREE:
        raise MomentError(f"max_deg={max_deg} exceeds {MAX_DEGREE}; the monomial Gram "
                          "matrix is numerically singular beyond that")
    if max_deg < 0:
        raise MomentError("max_deg must be non-negative")
    n = max_deg + 2
    z = mesh.nodes
    dz = mesh.tangents * mesh.weights
    zp = z[None, :] ** np.arange(n)[:, None]          # (n, nodes)
    zb = np.conj(zp)
    # mu[m, k] = sum_q z^m conj(z)^(k+1) dz / (2i (k+1))
    right = (zb * np.conj(z)[None, :]) * dz[None, :]
    mu = (zp @ right.T) / (2j * np.arange(1, n + 1)[None, :])
    defect = float(np.abs(mu - mu.conj().T).max() / np.abs(mu).max())
    mu = 0.5 * (mu + mu.conj().T)
    return MomentTable(mu, max_deg, {"hermitian_defect": defect, "n_nodes": mesh.n})


def area_moments(quad: AreaQuadrature, max_deg: int) -> MomentTable:
    """Direct area-quadrature moments (independent cross-check of the contour route)."""
    n = max_deg + 2
    zp = quad.nodes[None, :] ** np.arange(n)[:, None]
    mu = (zp * quad.weights[None, :]) @ np.conj(zp).T
    return MomentTable(mu, max_deg, {"source": "area"})


@dataclass(frozen=True, eq=False)
class CoeffMatrix:
    """Lower-triangular C with e_k = sum_{m <= k} C[k, m] z^m orthonormal."""

    C: np.ndarray
    effective_degree: int
    cond: float
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.C.shape[0]

    def to_dict(self) -> dict:
        return {"effective_degree": self.effective_degree, "cond": self.cond,
                "real": self.C.real.tolist(), "imag": self.C.imag.tolist(),
                "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _equilibrate(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = 1.0 / np.sqrt(np.real(np.diag(H)))
    return s, H * s[:, None] * s[None, :]


def orthonormal_basis(moments: MomentTable, cond_cap: float = DEFAULT_COND_CAP,
                      max_degree: int | None = None,
                      ortho_tol: float | None = DEFAULT_ORTHO_TOL) -> CoeffMatrix:
    """Cholesky orthonormalization of 1, z, z^2, ... against the moment Gram matrix.

    The degree is truncated at the largest d whose diagonally equilibrated
    Gram block has 2-norm condition number <= ``cond_cap``. The factorization
    itself runs in extended precision (see ``_mp_cholesky_inverse``), but the
    coefficients are stored in double precision, which costs roughly
    eps * cond in orthonormality. With ``ortho_tol`` set, the degree is cut
    further to the largest block whose measured defect max|C H C^H - I| stays
    within it; ``ortho_tol=None`` applies the condition cap alone.

    Raises
    ------
    MomentError
        If the Gram block of degree 1 is not positive definite.
    """
    top = moments.max_deg if max_degree is None else min(max_degree, moments.max_deg)
    H_full = moments.gram(top)
    if not np.all(np.real(np.diag(H_full)[:2]) > 0):
        raise MomentError("moment Gram matrix is not positive definite at degree 1")
    try:
        np.linalg.cholesky(_equilibrate(H_full[:2, :2])[1])
    except np.linalg.LinAlgError as exc:
        raise MomentError("moment Gram matrix is not positive definite at degree 1") from exc
    deg, cond = 0, 1.0
    for d in range(1, top + 1):
        if not np.real(H_full[d, d]) > 0:
            break
        ev = np.linalg.eigvalsh(_equilibrate(H_full[: d + 1, : d + 1])[1])
        c = np.inf if ev[0] <= 0 else ev[-1] / ev[0]
        if c > cond_cap:
            break
        deg, cond = d, float(c)
    cond_deg = deg
    H = H_full[: deg + 1, : deg + 1]
    C = _mp_cholesky_inverse(H)
    E = _mp_gram_error(C, H)
    # leading blocks of C stay the inverse factors of the leading Gram blocks
    block_err = np.array([np.abs(E[: d + 1, : d + 1]).max() for d in range(deg + 1)])
    if ortho_tol is not None:
        ok = np.nonzero(block_err <= ortho_tol)[0]
        deg = int(ok.max()) if ok.size else 0
        if deg < cond_deg:
            ev = np.linalg.eigvalsh(_equilibrate(H_full[: deg + 1, : deg + 1])[1])
            cond = float(ev[-1] / ev[0])
    C = C[: deg + 1, : deg + 1]
    meta = {"orthonormality_defect": float(block_err[deg]), "truncated": deg < top,
            "cond_cap": cond_cap, "cond_degree": cond_deg, "ortho_tol": ortho_tol}
    return CoeffMatrix(C, deg, cond, meta)


def _to_mp(A: np.ndarray) -> mp.matrix:
    return mp.matrix([[mp.mpc(complex(x)) for x in row] for row in A])


def _mp_cholesky_inverse(H: np.ndarray) -> np.ndarray:
    """Inverse Cholesky factor of H, computed in extended precision and rounded.

    Forming C in double precision loses about eps * cond(H) in C H C^H; the
    rounded extended-precision factor only loses about eps * sqrt(cond(H)).
    """
    s, He = _equilibrate(H)
    He = 0.5 * (He + He.conj().T)
    with mp.workdps(MP_DIGITS):
        R = mp.cholesky(_to_mp(He))
        n = He.shape[0]
        X = mp.zeros(n, n)
        for j in range(n):
            X[j, j] = 1 / R[j, j]
            for i in range(j + 1, n):
                acc = mp.mpc(0)
                for k in range(j, i):
                    acc += R[i, k] * X[k, j]
                X[i, j] = -acc / R[i, i]
        C = np.array(X.tolist(), dtype=complex)
    return np.tril(C * s[None, :])


def _mp_gram_error(C: np.ndarray, H: np.ndarray) -> np.ndarray:
    """C H C^H - I evaluated in extended precision for the rounded C."""
    with mp.workdps(MP_DIGITS):
        Cm = _to_mp(C)
        E = Cm * _to_mp(H) * Cm.H - mp.eye(C.shape[0])
        return np.array(E.tolist(), dtype=complex)


def evaluate_basis(C: CoeffMatrix | np.ndarray, points) -> np.ndarray:
    """Values e_k(z_q) as a (len(points), size) matrix, by Horner's rule per basis row."""
    Cm = C.C if isinstance(C, CoeffMatrix) else np.asarray(C)
    z = np.asarray(points, dtype=complex).ravel()
    deg = Cm.shape[1] - 1
    # Horner over monomial degree for all basis functions at once
    out = np.zeros((z.size, Cm.shape[0]), dtype=complex)
    for m in range(deg, -1, -1):
        out = out * z[:, None] + Cm[:, m][None, :]
    return out


def basis_gram(C: CoeffMatrix, quad: AreaQuadrature) -> np.ndarray:
    """Gram matrix <e_k, e_l> recomputed from point values and an area rule."""
    V = evaluate_basis(C, quad.nodes)
    return (V.T * quad.weights[None, :]) @ V.conj()
