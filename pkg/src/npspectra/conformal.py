"""Mobius maps of arc-polygons and Schwarz-Christoffel-type maps onto convex domains.

The map psi of the unit disk is defined through its derivative

    psi'(w) = prod_j (w - p_j)^alpha_j,
    alpha_N = -(1 + theta_N / pi),  alpha_j = theta_j / pi - 1  (j < N),

with prevertices p_j on the unit circle. Powers are taken as
(w - p)^alpha = (-p)^alpha (1 - w / p)^alpha with principal branches, so each
factor has its cut on the ray from p radially outward and |psi'(0)| = 1.
The last prevertex is sent to infinity; its angle theta_N is the positive
opening of the image at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from ._quadrature import gauss_legendre
from .geometry import (DomainSpec, GeometryError, _centroid, _validate, check_star_shaped,
                       interior_angles, map_edge)

ANGLE_TOL = 1e-8


class MobiusError(GeometryError):
    pass


class SCSingularityError(ValueError):
    pass


class AccuracyError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Mobius maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MobiusMap:
    """z -> (a z + b) / (c z + d) with ad - bc != 0."""

    a: complex = 1 + 0j
    b: complex = 0j
    c: complex = 0j
    d: complex = 1 + 0j

    def __post_init__(self):
        for k in "abcd":
            object.__setattr__(self, k, complex(getattr(self, k)))
        if abs(self.det) == 0.0:
            raise MobiusError("degenerate Mobius map: ad - bc = 0")

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    @property
    def coeffs(self) -> tuple:
        return (self.a, self.b, self.c, self.d)

    @property
    def pole(self) -> complex | None:
        return None if self.c == 0 else -self.d / self.c

    @property
    def image_of_infinity(self) -> complex | None:
        return None if self.c == 0 else self.a / self.c

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.a * z + self.b) / (self.c * z + self.d)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return self.det / (self.c * z + self.d) ** 2

    def compose(self, other: "MobiusMap") -> "MobiusMap":
        """self o other."""
        m = np.array([[self.a, self.b], [self.c, self.d]]) @ \
            np.array([[other.a, other.b], [other.c, other.d]])
        return MobiusMap(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.d, -self.b, -self.c, self.a)

    @classmethod
    def inversion(cls, z0: complex) -> "MobiusMap":
        """z -> 1 / (z - z0)."""
        return cls(0j, 1 + 0j, 1 + 0j, -complex(z0))


def _location(d: DomainSpec, z: complex, tol: float) -> str:
    """'inside', 'outside' or 'boundary' (within tol of the sampled boundary)."""
    ring = d.sample(800)
    poly = shapely.Polygon(np.column_stack([ring.real, ring.imag]))
    p = shapely.Point(z.real, z.imag)
    if poly.exterior.distance(p) <= tol:
        return "boundary"
    return "inside" if poly.contains(p) else "outside"


def mobius_apply(L: MobiusMap, d: DomainSpec, exterior: bool = False,
                 tol: float = 1e-9) -> DomainSpec:
    """Image of d (or, with ``exterior``, of its complement) under L.

    Lines and circles map exactly; vertices map to vertices and interior
    angles are checked afterwards (theta for the domain itself, 2 pi - theta
    for the exterior image).

    Raises
    ------
    MobiusError
        If the pole lies in the closed domain (ordinary mode) or not strictly
        inside it (exterior mode), or if the angle check fails.
    """
    pole = L.pole
    where = "outside" if pole is None else _location(d, pole, tol * max(1.0, abs(pole)))
    if not exterior and where != "outside":
        raise MobiusError(f"pole {pole} lies {where} the closed domain; the image is unbounded")
    if exterior and where != "inside":
        raise MobiusError(f"exterior mode needs the pole strictly inside the domain (it is {where})")
    edges = tuple(map_edge(e, L.coeffs) for e in d.edges)
    if exterior:
        anchor = L.image_of_infinity
    else:
        anchor = complex(L(d.anchor))
    img = DomainSpec(f"mobius({d.kind})", edges, anchor, 1.0,
                     {"source": d.kind, "source_params": d.params, "coeffs": list(L.coeffs),
                      "exterior": exterior})
    if img.signed_area() < 0:
        edges = tuple(e.reversed() for e in reversed(edges))
        img = DomainSpec(img.kind, edges, anchor, 1.0, img.params)
    img = _validate(img)
    if not exterior:
        try:
            check_star_shaped(img)
        except GeometryError:
            img = DomainSpec(img.kind, img.edges, _centroid(img.edges), 1.0, img.params)
    want = sorted(interior_angles(d))
    if exterior:
        want = sorted(2 * math.pi - t for t in want)
    got = sorted(interior_angles(img))
    if len(got) != len(want) or any(abs(g - w) > ANGLE_TOL for g, w in zip(got, want)):
        raise MobiusError(f"interior angles not preserved: {want} -> {got}")
    return img


# ---------------------------------------------------------------------------
# Schwarz-Christoffel-type maps onto convex domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SCMapSpec:
    """Prevertices on the unit circle (counter-clockwise) and interior angles.

    ``angles[-1]`` belongs to the prevertex sent to infinity.
    """

    prevertices: np.ndarray
    angles: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.prevertices, dtype=complex).ravel()
        th = np.asarray(self.angles, dtype=float).ravel()
        object.__setattr__(self, "prevertices", p)
        object.__setattr__(self, "angles", th)
        if p.size == 0 or p.size != th.size:
            raise ValueError("need one angle per prevertex")
        if np.any(np.abs(np.abs(p) - 1.0) > 1e-12):
            raise ValueError("prevertices must lie on the unit circle")
        if np.any((th <= 0) | (th >= math.pi)):
            raise ValueError("angles must lie in (0, pi)")
        arg = np.mod(np.angle(p) - np.angle(p[0]), 2 * math.pi)
        if p.size > 1 and (np.any(np.diff(arg) <= 0)):
            raise ValueError("prevertices must be distinct and counter-clockwise")

    @property
    def n(self) -> int:
        return self.prevertices.size

    @property
    def exponents(self) -> np.ndarray:
        alpha = self.angles / math.pi - 1.0
        alpha[-1] = -(1.0 + self.angles[-1] / math.pi)
        return alpha

    @property
    def angle_sum(self) -> float:
        """sum_{j<N} (pi - theta_j) + pi + theta_N; admissible iff <= 2 pi."""
        th = self.angles
        return float(np.sum(math.pi - th[:-1]) + math.pi + th[-1])

    @property
    def admissible(self) -> bool:
        return self.angle_sum <= 2 * math.pi + 1e-12


def sc_derivative(spec: SCMapSpec, w) -> np.ndarray:
    """psi'(w) for |w| < 1 (vectorized)."""
    w = np.asarray(w, dtype=complex)
    p = spec.prevertices
    alpha = spec.exponents
    dist = np.abs(w[..., None] - p)
    if np.any(dist < 1e-14):
        raise SCSingularityError("w coincides with a prevertex")
    logs = alpha * (np.log(-p) + np.log(1.0 - w[..., None] / p))
    return np.exp(logs.sum(axis=-1))


def _graded_nodes(tstars, dists, order: int, max_levels: int = 60):
    """Composite Gauss rule on [0, 1] refined dyadically toward each tstar."""
    x, wq = gauss_legendre(order)
    breaks = {0.0, 1.0}
    for ts, dd in zip(tstars, dists):
        ts = min(max(ts, 0.0), 1.0)
        dd = max(dd, 1e-15)
        breaks.add(ts)
        for side in (0.0, 1.0):
            length = abs(side - ts)
            lev = 0
            while length > dd and lev < max_levels:
                length *= 0.5
                breaks.add(ts + (1 if side > ts else -1) * length)
                lev += 1
    b = np.array(sorted(breaks))
    b = b[np.concatenate([[True], np.diff(b) > 1e-16])]
    a0, a1 = b[:-1], b[1:]
    half = 0.5 * (a1 - a0)
    mid = 0.5 * (a1 + a0)
    return ((mid[:, None] + half[:, None] * x[None, :]).ravel(),
            (half[:, None] * wq[None, :]).ravel())


def _segment_integral(spec: SCMapSpec, a: complex, b: complex, order: int) -> complex:
    """int_a^b psi'(z) dz along the straight segment, graded toward near prevertices."""
    v = b - a
    if v == 0:
        return 0j
    p = spec.prevertices
    t = np.clip(np.real((p - a) * np.conj(v)) / abs(v) ** 2, 0.0, 1.0)
    dist = np.abs(a + t * v - p) / abs(v)
    near = dist < 1.0
    s, ws = _graded_nodes(t[near], dist[near], order)
    return complex(np.sum(ws * sc_derivative(spec, a + s * v)) * v)


def _leg(spec: SCMapSpec, a: complex, b: complex, tol: float, max_order: int) -> complex:
    prev, order = None, 8
    while True:
        val = _segment_integral(spec, a, b, order)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        if order >= max_order:
            change = math.nan if prev is None else abs(val - prev)
            raise AccuracyError(f"sc_map: leg {a} -> {b} not converged to {tol:g} "
                                f"at order {order} (last change {change:.3e})")
        prev, order = val, min(2 * order, max_order)


def sc_map(spec: SCMapSpec, w, path=None, tol: float = 1e-12,
           path_resolution: int = 32) -> np.ndarray:
    """psi(w) by Gauss integration of psi' along 0 -> [path...] -> w.

    Each leg is graded dyadically toward prevertices near it; the Gauss order
    is doubled from 8 until two successive results agree to ``tol``
    (relative), up to ``path_resolution``.

    Raises
    ------
    AccuracyError
        If the tolerance is not met at the resolution cap.
    """
    w_arr = np.atleast_1d(np.asarray(w, dtype=complex))
    if np.any(np.abs(w_arr) >= 1.0):
        raise ValueError("sc_map needs |w| < 1")
    out = np.empty(w_arr.size, dtype=complex)
    base = [0j] + [complex(q) for q in (path or [])]
    for i, wi in enumerate(w_arr.ravel()):
        pts = base + [complex(wi)]
        out[i] = sum(_leg(spec, a, b, tol, path_resolution) for a, b in zip(pts[:-1], pts[1:]))
    out = out.reshape(w_arr.shape)
    return out if np.ndim(w) else out[0]


@dataclass(frozen=True)
class ConvexityCertificate:
    holds: bool
    min_value: float
    argmin: complex
    analytic_bound: float

    def to_dict(self) -> dict:
        return {"holds": self.holds, "min_value": self.min_value,
                "argmin": [self.argmin.real, self.argmin.imag],
                "analytic_bound": self.analytic_bound}


def convexity_function(spec: SCMapSpec, w) -> np.ndarray:
    """Re(1 + w psi''(w) / psi'(w)); positive on the disk iff psi is convex."""
    w = np.asarray(w, dtype=complex)
    p = spec.prevertices
    coef = -spec.exponents      # 1 + theta_N/pi at p_N, 1 - theta_j/pi otherwise
    terms = coef * (w[..., None] / (w[..., None] - p))
    return 1.0 - np.real(terms.sum(axis=-1))


def convexity_certificate(spec: SCMapSpec, grid_size: int = 256,
                          levels: int = 14) -> ConvexityCertificate:
    """Minimum of the convexity function on circles |w| = 1 - 2^-k, k = 1..levels.

    Each term Re(w / (w - p)) is below 1/2 on the disk, which gives the
    analytic bound 1 - angle_sum / (2 pi) <= min_value; the grid minimum is
    checked against it.
    """
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    r = 1.0 - 2.0 ** -np.arange(1, levels + 1)
    # offset by half a step so that no sample falls on a prevertex
    phi = 2 * math.pi * (np.arange(grid_size) + 0.5) / grid_size
    w = (r[:, None] * np.exp(1j * phi)[None, :]).ravel()
    w = np.concatenate([[0j], w])
    vals = convexity_function(spec, w)
    k = int(np.argmin(vals))
    bound = 1.0 - spec.angle_sum / (2 * math.pi)
    vmin = float(vals[k])
    if vmin < bound - 1e-9:
        raise AccuracyError(f"grid minimum {vmin} below the analytic bound {bound}")
    return ConvexityCertificate(vmin > 0.0, vmin, complex(w[k]), bound)


def random_admissible_spec(rng: np.random.Generator, n: int | None = None,
                           margin: float = 0.05) -> SCMapSpec:
    """Random prevertices and angles with angle_sum <= 2 pi - margin.

    The condition reads sum_{j<N} (pi - theta_j) + theta_N <= pi - margin, so
    the deficits pi - theta_j and theta_N are drawn as a random split of a
    budget below pi - margin.
    """
    n = int(rng.integers(1, 6)) if n is None else int(n)
    budget = rng.uniform(0.2, 1.0) * (math.pi - margin)
    share = rng.dirichlet(np.ones(n)) * budget
    share = np.maximum(share, 1e-3)
    share *= budget / share.sum()
    th = np.empty(n)
    th[:-1] = math.pi - share[:-1]
    th[-1] = share[-1]
    gaps = rng.dirichlet(np.full(n, 2.0)) * 2 * math.pi
    ang = rng.uniform(0, 2 * math.pi) + np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    return SCMapSpec(np.exp(1j * ang), th)


# ---------------------------------------------------------------------------
# boundary tracing
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TracedMap:
    w: np.ndarray
    image: np.ndarray
    z0: complex
    bounded: np.ndarray


def trace_boundary(spec: SCMapSpec, samples: int = 400, radius: float = 1 - 1e-6,
                   cutoff: float = 1e3) -> TracedMap:
    """Image of the circle |w| = radius under psi, and under z -> 1 / (z - z0).

    Points with |psi| > cutoff (near the prevertex sent to infinity) are
    dropped from ``image``. z0 is taken on the ray opposite to the escape
    direction, far enough out to miss the convex image.
    """
    p = spec.prevertices
    phi = np.angle(p[0]) + 2 * math.pi * (np.arange(samples) + 0.5) / samples
    w = radius * np.exp(1j * phi)
    # march along the circle chord by chord instead of restarting at 0
    z = np.empty(samples, dtype=complex)
    z[0] = sc_map(spec, w[0])
    for k in range(1, samples):
        z[k] = z[k - 1] + _leg(spec, complex(w[k - 1]), complex(w[k]), 1e-12, 32)
    escape = complex(sc_map(spec, 0.999 * p[-1]))
    direction = escape / abs(escape) if escape != 0 else 1 + 0j
    keep = np.abs(z) <= cutoff
    finite = z[keep]
    poly = shapely.Polygon(np.column_stack([finite.real, finite.imag])).buffer(0)
    z0 = -direction
    for _ in range(60):
        if not poly.contains(shapely.Point(z0.real, z0.imag)) and \
                poly.exterior.distance(shapely.Point(z0.real, z0.imag)) > 1e-3 * abs(z0):
            break
        z0 *= 2.0
    return TracedMap(w, np.where(keep, z, np.nan + 0j), complex(z0), 1.0 / (z - z0))


# ---------------------------------------------------------------------------
# compact-perturbation kernel
# ---------------------------------------------------------------------------


def perturbation_kernel(phi, dphi, eta, w) -> np.ndarray:
    """phi'(w) / (phi(eta) - phi(w)) - 1 / (eta - w)."""
    eta = np.asarray(eta, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(eta == w):
        raise ValueError("perturbation kernel is undefined on the diagonal eta = w")
    return dphi(w) / (phi(eta) - phi(w)) - 1.0 / (eta - w)


def fit_singularity_exponent(phi, dphi, sample_points, rng: np.random.Generator,
                             n_pairs: int = 400, rmin: float = 1e-5,
                             rmax: float = 1e-2) -> float:
    """Slope of log|K(eta, w)| against log|eta - w| over random near-diagonal pairs.

    ``sample_points(rng, n)`` returns n base points w; eta = w + r e^{i t}
    with r log-uniform in [rmin, rmax].
    """
    w = np.asarray(sample_points(rng, n_pairs), dtype=complex)
    r = np.exp(rng.uniform(math.log(rmin), math.log(rmax), n_pairs))
    eta = w + r * np.exp(1j * rng.uniform(0, 2 * math.pi, n_pairs))
    k = np.abs(perturbation_kernel(phi, dphi, eta, w))
    k = np.maximum(k, 1e-300)
    slope, _ = np.polyfit(np.log(r), np.log(k), 1)
    return float(slope)
