"""Low-level quadrature rules shared by the boundary and area discretizations."""

from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] (read-only, cached)."""
    x, w = roots_legendre(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def _legendre_vandermonde_inv(order: int) -> np.ndarray:
    x, _ = gauss_legendre(order)
    V = np.polynomial.legendre.legvander(x, order - 1)
    return np.linalg.inv(V)


def legendre_log_moments(tau: float, nmax: int) -> np.ndarray:
    """Integrals of log|tau - s| P_n(s) over s in [-1, 1] for n = 0..nmax.

    Valid for -1 < tau < 1. Uses P_n = (P'_{n+1} - P'_{n-1}) / (2n + 1), an
    integration by parts, and the Ferrers functions of the second kind Q_n,
    for which PV int P_n(s) / (tau - s) ds = 2 Q_n(tau).
    """
    if not -1.0 < tau < 1.0:
        raise ValueError("tau must lie strictly inside (-1, 1)")
    q = np.empty(nmax + 2)
    q[0] = 0.5 * np.log((1.0 + tau) / (1.0 - tau))
    q[1] = tau * q[0] - 1.0
    for n in range(1, nmax + 1):
        q[n + 1] = ((2 * n + 1) * tau * q[n] - n * q[n - 1]) / (n + 1)
    m = np.empty(nmax + 1)
    m[0] = (1 + tau) * np.log(1 + tau) + (1 - tau) * np.log(1 - tau) - 2.0
    for n in range(1, nmax + 1):
        m[n] = 2.0 * (q[n + 1] - q[n - 1]) / (2 * n + 1)
    return m


@lru_cache(maxsize=None)
def log_self_weights(order: int) -> np.ndarray:
    """Product weights for log-singular integrals on a Gauss panel.

    Row i holds weights W[i, k] with
    int_{-1}^{1} log|s - s_i| p(s) ds = sum_k W[i, k] p(s_k)
    exactly for polynomials p of degree < order, s_i the Gauss nodes.
    """
    x, _ = gauss_legendre(order)
    Vinv = _legendre_vandermonde_inv(order)
    M = np.array([legendre_log_moments(t, order - 1) for t in x])
    W = M @ Vinv
    W.setflags(write=False)
    return W


def barycentric_weights(x: np.ndarray) -> np.ndarray:
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, 1.0)
    return 1.0 / d.prod(axis=1)


@lru_cache(maxsize=None)
def _gauss_bary(order: int) -> np.ndarray:
    x, _ = gauss_legendre(order)
    return barycentric_weights(np.asarray(x))


def lagrange_matrix(order: int, s: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis on the Gauss nodes at points s in [-1, 1].

    Returns an array of shape (len(s), order).
    """
    x, _ = gauss_legendre(order)
    bw = _gauss_bary(order)
    s = np.asarray(s, dtype=float)
    diff = s[:, None] - x[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15, rtol=0.0)
    diff[exact] = 1.0
    terms = bw[None, :] / diff
    L = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        L[hit] = exact[hit].astype(float)
    return L


def graded_rule(tstar: float, dist: float, order: int, max_levels: int = 40):
    """Composite Gauss rule on [-1, 1] graded dyadically toward tstar.

    ``tstar`` is the reference coordinate nearest to a (nearby) singularity and
    ``dist`` its distance from the interval in reference units. Subintervals
    are halved toward tstar until their half-length drops below ``dist``.
    """
    x, w = gauss_legendre(order)
    tstar = min(max(tstar, -1.0), 1.0)
    dist = max(dist, 1e-14)
    breaks = {-1.0, 1.0, tstar}
    for side in (-1.0, 1.0):
        length = abs(side - tstar)
        level = 0
        while length > 2.0 * dist and level < max_levels:
            length *= 0.5
            breaks.add(tstar + side * length)
            level += 1
    b = np.array(sorted(breaks))
    b = b[np.concatenate([[True], np.diff(b) > 1e-15])]
    a0, a1 = b[:-1], b[1:]
    half = 0.5 * (a1 - a0)
    mid = 0.5 * (a1 + a0)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights
