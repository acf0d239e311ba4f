"""Angle-based bounds on Fredholm eigenvalues of curvilinear polygons.

All quantities depend only on the interior angles theta_j in (0, 2 pi):

* lower bound for the spectral radius:  max_j |1 - theta_j / pi|;
* largest Fredholm eigenvalue of a convex unbounded domain of the special
  class (angles in (0, pi), the angle at infinity included): 1 - theta_min / pi;
* upper bound for the essential spectrum, max_j (1 - theta_j / pi), valid when
  sum_{j<N} (pi - theta_j) + pi + theta_N <= 2 pi for some cyclic labelling.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import DomainSpec, interior_angles
from .layerpot import SCHEMA, SpectrumResult

DEFAULT_TOL = 0.02
PLATEAU_FRACTION = 0.05


class BoundsError(ValueError):
    pass


def _angles(angles) -> np.ndarray:
    th = np.asarray(list(angles), dtype=float)
    if np.any((th <= 0) | (th >= 2 * math.pi)):
        raise BoundsError("angles must lie in (0, 2 pi)")
    return th


def kuhnau_lower_bound(angles) -> float:
    """max_j |1 - theta_j / pi|; 0 for an empty list (smooth boundary)."""
    th = _angles(angles)
    return float(np.abs(1.0 - th / math.pi).max()) if th.size else 0.0


def krushkal_value(angles) -> float:
    """1 - theta_min / pi for a convex member of the class (angle at infinity listed)."""
    th = _angles(angles)
    if th.size == 0:
        raise BoundsError("need at least one angle")
    if np.any(th >= math.pi):
        raise BoundsError("all angles must lie in (0, pi) for a convex domain")
    return float(1.0 - th.min() / math.pi)


@dataclass(frozen=True)
class EssBound:
    upper: float
    permutation: int        # index of the vertex playing the role of N


def essbound_condition(angles, last: int) -> float:
    """sum_{j != last} (pi - theta_j) + pi + theta_last (<= 2 pi is required)."""
    th = _angles(angles)
    return float(np.sum(math.pi - np.delete(th, last)) + math.pi + th[last])


def essbound_check(angles) -> EssBound | None:
    """Essential-spectrum bound if some cyclic labelling satisfies the angle condition.

    Cyclic permutations only change which vertex is last, and the sum over the
    others is order-free, so each choice of the last vertex is tried. Returns
    None if no labelling works or if a vertex is reflex or flat.
    """
    th = _angles(angles)
    if th.size == 0:
        raise BoundsError("need at least one angle")
    if np.any(th >= math.pi):
        return None
    for k in range(th.size):
        if essbound_condition(th, k) <= 2 * math.pi + 1e-12:
            return EssBound(float(np.max(1.0 - th / math.pi)), k)
    return None


def essbound_failure_reason(angles) -> str | None:
    th = _angles(angles)
    if np.any(th >= math.pi):
        return "reflex or flat vertex"
    if essbound_check(th) is None:
        return "angle condition fails for every cyclic labelling"
    return None


@dataclass
class BoundReport:
    kuhnau_lower: float
    krushkal_value: float | None
    essbound_upper: float | None
    essbound_permutation: int | None
    condition_satisfied: bool
    computed_radius: float | None
    verdicts: dict = field(default_factory=dict)
    angles: list = field(default_factory=list)
    tol: float = DEFAULT_TOL

    def to_dict(self, seed: int | None = None) -> dict:
        out = {"schema": SCHEMA, **asdict(self)}
        if seed is not None:
            out["seed"] = seed
        return out

    def to_json(self, seed: int | None = None) -> str:
        return json.dumps(self.to_dict(seed), indent=2, sort_keys=True)


def mass_above(result: SpectrumResult, level: float) -> float:
    """Fraction of the mean-zero spectrum with |lambda| > level."""
    v = np.abs(result.mean_zero)
    return float(np.mean(v > level)) if v.size else 0.0


def validate_domain(d: DomainSpec, results, tol: float = DEFAULT_TOL,
                    plateau_fraction: float = PLATEAU_FRACTION,
                    krushkal: float | None = None) -> BoundReport:
    """Compare computed spectra of d against the angle bounds.

    The Kuhnau verdict passes iff the largest computed radius is at least
    kuhnau_lower - tol. The essential-bound verdict (only when the angle
    condition holds) is a consistency check: it fails only if more than
    ``plateau_fraction`` of the eigenvalues sit above essbound_upper + tol.
    ``krushkal`` carries the class value when the caller has one (bounded
    domains are never in the class themselves).

    Raises
    ------
    BoundsError
        If a result's metadata names a different domain kind.
    """
    if isinstance(results, SpectrumResult):
        results = [results]
    results = list(results)
    for r in results:
        kind = r.meta.get("domain")
        if kind is not None and kind != d.kind:
            raise BoundsError(f"result was computed for {kind!r}, not {d.kind!r}")
    th = interior_angles(d)
    kl = kuhnau_lower_bound(th)
    eb = essbound_check(th) if th else None
    radius = max((r.spectral_radius for r in results), default=None)
    verdicts = {}
    if radius is not None:
        margin = radius - (kl - tol)
        verdicts["kuhnau"] = {"pass": bool(margin >= 0), "margin": float(margin)}
        if eb is not None:
            level = eb.upper + tol
            mass = max(mass_above(r, level) for r in results)
            verdicts["essbound-consistency"] = {
                "pass": bool(mass <= plateau_fraction), "mass_above": mass,
                "margin": float(plateau_fraction - mass)}
    return BoundReport(
        kuhnau_lower=kl, krushkal_value=krushkal,
        essbound_upper=None if eb is None else eb.upper,
        essbound_permutation=None if eb is None else eb.permutation,
        condition_satisfied=eb is not None, computed_radius=radius,
        verdicts=verdicts, angles=[float(t) for t in th], tol=tol)
