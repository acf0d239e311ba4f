"""Domains with piecewise-smooth boundaries and their quadratures.

Points in the plane are complex numbers throughout. A domain is a closed,
counter-clockwise chain of parametrized edges, each mapping [0, 1] into the
plane; edge ``j`` starts at vertex ``a_j`` and ends at ``a_{j+1}``. A smooth
closed curve (disk, ellipse) is a single closed edge with no vertex.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np
import shapely

from ._quadrature import gauss_legendre

ANGLE_EPS = 1e-10
FIT_RADIUS = 0.5
FIT_MARGIN = 1e-2
MIN_PANEL_FRACTION = 1e-12
DEFAULT_MAX_NODES = 40000


class GeometryError(ValueError):
    """Invalid or degenerate geometry (self-intersection, cusps, orientation)."""


class DomainParseError(ValueError):
    """Malformed domain description; the message names the offending field."""


class StarShapeError(GeometryError):
    pass


class MeshResourceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Edges
# ---------------------------------------------------------------------------


def _mobius(coeffs, z):
    a, b, c, d = coeffs
    return (a * z + b) / (c * z + d)


def _mobius_d1(coeffs, z):
    a, b, c, d = coeffs
    return (a * d - b * c) / (c * z + d) ** 2


def _mobius_d2(coeffs, z):
    a, b, c, d = coeffs
    return -2.0 * c * (a * d - b * c) / (c * z + d) ** 3


@dataclass(frozen=True)
class Segment:
    a: complex
    b: complex
    closed = False

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.a + (self.b - self.a) * t

    def d1(self, t):
        return np.full(np.shape(t), self.b - self.a, dtype=complex)

    def d2(self, t):
        return np.zeros(np.shape(t), dtype=complex)

    def reversed(self):
        return Segment(self.b, self.a)

    def to_json(self):
        return {"type": "segment", "a": _cjson(self.a), "b": _cjson(self.b)}


@dataclass(frozen=True)
class Arc:
    """Circular arc from a to b; bulge = tan(phi / 4), phi the signed sweep.

    Positive bulge sweeps counter-clockwise, i.e. bulges outward when the
    domain is traversed counter-clockwise.
    """

    a: complex
    b: complex
    bulge: float
    closed = False

    def __post_init__(self):
        if self.bulge == 0.0:
            raise GeometryError("an arc needs a nonzero bulge; use Segment")
        if self.a == self.b:
            raise GeometryError("arc endpoints coincide")

    @property
    def sweep(self) -> float:
        return 4.0 * math.atan(self.bulge)

    @property
    def center(self) -> complex:
        d = self.b - self.a
        m = 0.5 * (self.a + self.b)
        return m + 1j * d / (2.0 * math.tan(0.5 * self.sweep))

    @property
    def radius(self) -> float:
        return abs(self.a - self.center)

    def _phase(self, t):
        c = self.center
        beta0 = np.angle(self.a - c)
        return beta0 + self.sweep * np.asarray(t, dtype=float)

    def point(self, t):
        return self.center + self.radius * np.exp(1j * self._phase(t))

    def d1(self, t):
        return 1j * self.sweep * self.radius * np.exp(1j * self._phase(t))

    def d2(self, t):
        return -(self.sweep**2) * self.radius * np.exp(1j * self._phase(t))

    def reversed(self):
        return Arc(self.b, self.a, -self.bulge)

    def to_json(self):
        return {"type": "arc", "a": _cjson(self.a), "b": _cjson(self.b),
                "bulge": self.bulge}


@dataclass(frozen=True)
class EllipseCurve:
    """Closed ellipse, counter-clockwise, t in [0, 1] -> angle 2 pi t."""

    center: complex
    a: float
    b: float
    rotation: float = 0.0
    closed = True

    @property
    def is_circle(self) -> bool:
        return self.a == self.b

    def point(self, t):
        th = 2.0 * np.pi * np.asarray(t, dtype=float)
        return self.center + np.exp(1j * self.rotation) * (
            self.a * np.cos(th) + 1j * self.b * np.sin(th))

    def d1(self, t):
        th = 2.0 * np.pi * np.asarray(t, dtype=float)
        return 2.0 * np.pi * np.exp(1j * self.rotation) * (
            -self.a * np.sin(th) + 1j * self.b * np.cos(th))

    def d2(self, t):
        th = 2.0 * np.pi * np.asarray(t, dtype=float)
        return -(2.0 * np.pi) ** 2 * np.exp(1j * self.rotation) * (
            self.a * np.cos(th) + 1j * self.b * np.sin(th))

    def to_json(self):
        return {"type": "ellipse", "center": _cjson(self.center), "a": self.a,
                "b": self.b, "rotation": self.rotation}


@dataclass(frozen=True)
class QuadBezier:
    p0: complex
    p1: complex
    p2: complex
    closed = False

    def point(self, t):
        t = np.asarray(t, dtype=float)
        s = 1.0 - t
        return s * s * self.p0 + 2.0 * s * t * self.p1 + t * t * self.p2

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        return 2.0 * (1.0 - t) * (self.p1 - self.p0) + 2.0 * t * (self.p2 - self.p1)

    def d2(self, t):
        return np.full(np.shape(t), 2.0 * (self.p2 - 2.0 * self.p1 + self.p0),
                       dtype=complex)

    def reversed(self):
        return QuadBezier(self.p2, self.p1, self.p0)

    def to_json(self):
        return {"type": "bezier2",
                "points": [_cjson(self.p0), _cjson(self.p1), _cjson(self.p2)]}


@dataclass(frozen=True)
class MappedEdge:
    """Image of ``base`` under z -> (a z + b) / (c z + d), optionally reversed."""

    base: Any
    coeffs: tuple
    flip: bool = False

    @property
    def closed(self):
        return self.base.closed

    def _t(self, t):
        t = np.asarray(t, dtype=float)
        return 1.0 - t if self.flip else t

    def point(self, t):
        return _mobius(self.coeffs, self.base.point(self._t(t)))

    def d1(self, t):
        s = self._t(t)
        z = self.base.point(s)
        v = _mobius_d1(self.coeffs, z) * self.base.d1(s)
        return -v if self.flip else v

    def d2(self, t):
        s = self._t(t)
        z = self.base.point(s)
        z1 = self.base.d1(s)
        return _mobius_d2(self.coeffs, z) * z1**2 + _mobius_d1(self.coeffs, z) * self.base.d2(s)

    def reversed(self):
        return MappedEdge(self.base, self.coeffs, not self.flip)

    def to_json(self):
        return {"type": "mobius_image", "base": self.base.to_json(),
                "coeffs": [_cjson(c) for c in self.coeffs], "flip": self.flip}


def _cjson(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def edge_from_json(obj: dict):
    kind = obj.get("type")
    c = lambda v: complex(v[0], v[1])  # noqa: E731
    if kind == "segment":
        return Segment(c(obj["a"]), c(obj["b"]))
    if kind == "arc":
        return Arc(c(obj["a"]), c(obj["b"]), float(obj["bulge"]))
    if kind == "ellipse":
        return EllipseCurve(c(obj["center"]), float(obj["a"]), float(obj["b"]),
                            float(obj.get("rotation", 0.0)))
    if kind == "bezier2":
        p = obj["points"]
        return QuadBezier(c(p[0]), c(p[1]), c(p[2]))
    if kind == "mobius_image":
        return MappedEdge(edge_from_json(obj["base"]),
                          tuple(c(v) for v in obj["coeffs"]), bool(obj["flip"]))
    raise DomainParseError(f"edges[].type: unknown edge type {kind!r}")


def edge_start(e) -> complex:
    return complex(e.point(0.0))


def edge_end(e) -> complex:
    return complex(e.point(1.0))


def edge_length(e, order: int = 64, pieces: int = 8) -> float:
    x, w = gauss_legendre(order)
    total = 0.0
    for k in range(pieces):
        t = (k + 0.5 * (x + 1.0)) / pieces
        total += float(np.sum(0.5 * w / pieces * np.abs(e.d1(t))))
    return total


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    """A simply connected domain bounded by a closed counter-clockwise chain."""

    kind: str
    edges: tuple
    anchor: complex
    scale_applied: float = 1.0
    params: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def smooth(self) -> bool:
        return len(self.edges) == 1 and self.edges[0].closed

    @property
    def vertices(self) -> tuple:
        if self.smooth:
            return ()
        return tuple(edge_start(e) for e in self.edges)

    @property
    def perimeter(self) -> float:
        return sum(edge_length(e) for e in self.edges)

    def sample(self, per_edge: int = 200) -> np.ndarray:
        """Dense boundary polyline (closing point omitted)."""
        t = np.linspace(0.0, 1.0, per_edge, endpoint=False)
        return np.concatenate([e.point(t) for e in self.edges])

    def signed_area(self) -> float:
        x, w = gauss_legendre(48)
        total = 0.0
        for e in self.edges:
            for k in range(8):
                t = (k + 0.5 * (x + 1.0)) / 8
                z = e.point(t)
                total += float(np.sum(0.5 * w / 8 * np.imag(np.conj(z) * e.d1(t))))
        return 0.5 * total

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": _jsonable(self.params),
                "edges": [e.to_json() for e in self.edges],
                "anchor": _cjson(self.anchor), "scale_applied": self.scale_applied}


def _jsonable(obj):
    if isinstance(obj, complex):
        return _cjson(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _turning(t_in: complex, t_out: complex) -> float:
    return float(np.angle(t_out / t_in))


def interior_angles(d: DomainSpec) -> list[float]:
    """Interior angle at each vertex from the one-sided edge tangents."""
    if d.smooth:
        return []
    n = len(d.edges)
    out = []
    for j in range(n):
        t_in = complex(d.edges[j - 1].d1(1.0))
        t_out = complex(d.edges[j].d1(0.0))
        theta = math.pi - _turning(t_in, t_out)
        out.append(theta)
    return out


def _validate(d: DomainSpec) -> DomainSpec:
    if not d.smooth:
        n = len(d.edges)
        if n < 1:
            raise GeometryError("domain has no edges")
        for j in range(n):
            e, nxt = d.edges[j], d.edges[(j + 1) % n]
            if abs(edge_end(e) - edge_start(nxt)) > 1e-9 * max(1.0, abs(edge_end(e))):
                raise GeometryError(f"edge {j} does not end where edge {(j + 1) % n} starts")
            if abs(edge_start(e) - edge_end(e)) < 1e-14:
                raise GeometryError(f"edge {j} has coincident endpoints")
        for j, theta in enumerate(interior_angles(d)):
            if theta < ANGLE_EPS or theta > 2 * math.pi - ANGLE_EPS:
                raise GeometryError(f"degenerate angle {theta!r} at vertex {j}")
            # a cusp pointing outward or inward cannot be told apart by tangents alone
            t_in = complex(d.edges[j - 1].d1(1.0))
            t_out = complex(d.edges[j].d1(0.0))
            if abs(abs(_turning(t_in, t_out)) - math.pi) < ANGLE_EPS:
                raise GeometryError(f"cusp at vertex {j}")
    ring = d.sample(256)
    if not shapely.LinearRing(np.column_stack([ring.real, ring.imag])).is_simple:
        raise GeometryError("boundary is self-intersecting")
    if d.signed_area() <= 0:
        raise GeometryError("boundary must be counter-clockwise (positive signed area)")
    return d


def _centroid(edges) -> complex:
    x, w = gauss_legendre(48)
    area = 0.0
    mom = 0.0
    for e in edges:
        for k in range(8):
            t = (k + 0.5 * (x + 1.0)) / 8
            z, dz = e.point(t), e.d1(t)
            ww = 0.5 * w / 8
            area += 0.5 * float(np.sum(ww * np.imag(np.conj(z) * dz)))
            # int_Omega z dA = (1 / 4i) oint z^2 ... use (1/2i) oint z zbar dz
            mom += np.sum(ww * z * np.conj(z) * dz) / 2j
    if abs(area) < 1e-300:
        # degenerate chain; validation rejects it right after
        return complex(np.mean([edge_start(e) for e in edges]))
    return complex(mom / area)


def make_polygon(vertices: Sequence[complex], bulges: Sequence[float] | None = None,
                 kind: str = "polygon", anchor: complex | None = None,
                 params: dict | None = None) -> DomainSpec:
    verts = [complex(v) for v in vertices]
    if len(verts) < 2 or (bulges is None and len(verts) < 3):
        raise DomainParseError("vertices: need at least 3 vertices (2 with arcs)")
    if bulges is None:
        bulges = [0.0] * len(verts)
    if len(bulges) != len(verts):
        raise DomainParseError("bulges: must have one entry per edge (= number of vertices)")
    edges = []
    for j, a in enumerate(verts):
        b = verts[(j + 1) % len(verts)]
        if a == b:
            raise GeometryError(f"consecutive vertices {j} and {(j + 1) % len(verts)} coincide")
        bj = float(bulges[j])
        edges.append(Segment(a, b) if bj == 0.0 else Arc(a, b, bj))
    edges = tuple(edges)
    if anchor is None:
        anchor = _centroid(edges)
    p = {"vertices": verts, "bulges": list(map(float, bulges))} if params is None else params
    return _validate(DomainSpec(kind, edges, complex(anchor), 1.0, p))


def disk(r: float = 1.0) -> DomainSpec:
    if not r > 0:
        raise DomainParseError("params.r: radius must be positive")
    return DomainSpec("disk", (EllipseCurve(0j, r, r),), 0j, 1.0, {"r": r})


def ellipse(a: float = 2.0, b: float = 1.0) -> DomainSpec:
    if not (a > 0 and b > 0):
        raise DomainParseError("params.a/params.b: semi-axes must be positive")
    return DomainSpec("ellipse", (EllipseCurve(0j, a, b),), 0j, 1.0, {"a": a, "b": b})


def rectangle(w: float, h: float) -> DomainSpec:
    if not (w > 0 and h > 0):
        raise DomainParseError("params.w/params.h: side lengths must be positive")
    v = [complex(-w / 2, -h / 2), complex(w / 2, -h / 2),
         complex(w / 2, h / 2), complex(-w / 2, h / 2)]
    return make_polygon(v, kind="rectangle", anchor=0j, params={"w": w, "h": h})


def square(s: float = 1.0) -> DomainSpec:
    d = rectangle(s, s)
    return DomainSpec("square", d.edges, d.anchor, 1.0, {"s": s})


def regular_ngon(n: int = 6, r: float = 1.0) -> DomainSpec:
    n = int(n)
    if n < 3:
        raise DomainParseError("params.n: need at least 3 vertices")
    if not r > 0:
        raise DomainParseError("params.r: circumradius must be positive")
    v = [r * np.exp(2j * np.pi * k / n) for k in range(n)]
    return make_polygon(v, kind="regular_ngon", anchor=0j, params={"n": n, "r": r})


def truncated_wedge(theta: float = math.pi / 3, radius: float = 1.0) -> DomainSpec:
    """Circular sector: vertex of angle theta at 0, capped by an arc of given radius."""
    if not 0 < theta < 2 * math.pi:
        raise DomainParseError("params.theta: opening must lie in (0, 2 pi)")
    if not radius > 0:
        raise DomainParseError("params.radius: cap radius must be positive")
    v = [0j, complex(radius), radius * np.exp(1j * theta)]
    bulges = [0.0, math.tan(theta / 4), 0.0]
    anchor = 0.35 * radius * np.exp(0.5j * theta)
    return make_polygon(v, bulges, kind="truncated_wedge", anchor=anchor,
                        params={"theta": theta, "radius": radius})


def lens(theta1: float = math.pi / 4, theta2: float = math.pi / 5,
         half_width: float = 1.0) -> DomainSpec:
    """Mirror-symmetric two-vertex domain with angles theta1 at -w and theta2 at +w.

    Each side is a quadratic Bezier arc whose end tangents make half the
    prescribed angle with the axis.
    """
    for name, th in (("theta1", theta1), ("theta2", theta2)):
        if not 0 < th < math.pi:
            raise DomainParseError(f"params.{name}: lens angles must lie in (0, pi)")
    a, b = complex(-half_width), complex(half_width)
    u1 = np.exp(-0.5j * theta1)
    u2 = np.exp(0.5j * theta2)
    # a + s u1 = b - r u2 ; solve the 2x2 real system for s
    M = np.array([[u1.real, u2.real], [u1.imag, u2.imag]])
    s, _ = np.linalg.solve(M, [(b - a).real, (b - a).imag])
    p1 = a + s * u1
    lower = QuadBezier(a, p1, b)
    upper = QuadBezier(b, np.conj(p1), a)
    d = DomainSpec("lens", (lower, upper), 0j, 1.0,
                   {"theta1": theta1, "theta2": theta2, "half_width": half_width})
    return _validate(d)


def random_arc_polygon(rng: np.random.Generator, n_vertices: int | None = None,
                       angle_range: tuple = (math.pi / 6, 11 * math.pi / 6),
                       max_tries: int = 1000) -> DomainSpec:
    """Random simple arc-polygon with every interior angle inside ``angle_range``.

    Vertices sit at jittered angles on a jittered circle; each edge gets a
    random bulge. Draws that are not simple, not star-shaped about the
    centroid, or violate the angle range are rejected.
    """
    lo, hi = angle_range
    for _ in range(max_tries):
        n = int(rng.integers(3, 7)) if n_vertices is None else int(n_vertices)
        phi = np.sort(rng.uniform(0, 2 * math.pi, n))
        if np.min(np.diff(np.concatenate([phi, [phi[0] + 2 * math.pi]]))) < 0.5:
            continue
        rad = rng.uniform(0.6, 1.0, n)
        verts = rad * np.exp(1j * phi)
        bulges = rng.uniform(-0.35, 0.35, n)
        try:
            d = make_polygon(verts, bulges, kind="arc_polygon")
            check_star_shaped(d)
        except GeometryError:
            continue
        th = interior_angles(d)
        if min(th) > lo and max(th) < hi:
            return d
    raise GeometryError("no admissible random arc-polygon found")


PRESETS = {
    "disk": (disk, ("r",)),
    "ellipse": (ellipse, ("a", "b")),
    "rectangle": (rectangle, ("w", "h")),
    "square": (square, ("s",)),
    "regular_ngon": (regular_ngon, ("n", "r")),
    "truncated_wedge": (truncated_wedge, ("theta", "radius")),
    "lens": (lens, ("theta1", "theta2", "half_width")),
}

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg,
        ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """Parse a float or a small arithmetic expression in ``pi`` (e.g. ``3*pi/4``)."""
    src = str(text).strip().replace("π", "pi")
    try:
        node = ast.parse(src, mode="eval").body
    except SyntaxError as exc:
        raise DomainParseError(f"not a number: {text!r}") from exc

    def ev(n):
        if isinstance(n, ast.Constant) and isinstance(n.value, (int, float)):
            return float(n.value)
        if isinstance(n, ast.Name) and n.id == "pi":
            return math.pi
        if isinstance(n, ast.BinOp) and type(n.op) in _OPS:
            return _OPS[type(n.op)](ev(n.left), ev(n.right))
        if isinstance(n, ast.UnaryOp) and type(n.op) in _OPS:
            return _OPS[type(n.op)](ev(n.operand))
        raise DomainParseError(f"not a number: {text!r}")

    return ev(node)


def build_domain(source: str | dict) -> DomainSpec:
    """Build a domain from a preset string (``"ellipse:2,1"``) or a JSON document.

    JSON documents take one of the forms ``{"kind": <preset>, "params": {...}}``,
    ``{"kind": "polygon", "vertices": [[x, y], ...]}`` or
    ``{"kind": "arc_polygon", "vertices": [...], "bulges": [...]}``.
    """
    if isinstance(source, str):
        name, _, rest = source.strip().partition(":")
        name = name.strip()
        if name not in PRESETS:
            raise DomainParseError(f"kind: unknown preset {name!r}")
        fn, names = PRESETS[name]
        values = [parse_number(v) for v in rest.split(",")] if rest.strip() else []
        if len(values) > len(names):
            raise DomainParseError(f"params: {name} takes at most {len(names)} parameters")
        return fn(*values)
    if not isinstance(source, dict):
        raise DomainParseError("document must be a JSON object")
    kind = source.get("kind")
    if kind is None:
        raise DomainParseError("kind: missing")
    if kind in ("polygon", "arc_polygon"):
        raw = source.get("vertices")
        if not isinstance(raw, list):
            raise DomainParseError("vertices: expected a list of [x, y] pairs")
        try:
            verts = [complex(float(p[0]), float(p[1])) for p in raw]
        except (TypeError, ValueError, IndexError) as exc:
            raise DomainParseError("vertices: expected a list of [x, y] pairs") from exc
        bulges = source.get("bulges")
        if kind == "arc_polygon":
            if not isinstance(bulges, list):
                raise DomainParseError("bulges: required list for arc_polygon")
            try:
                bulges = [float(b) for b in bulges]
            except (TypeError, ValueError) as exc:
                raise DomainParseError("bulges: entries must be numbers") from exc
        else:
            bulges = None
        anchor = source.get("anchor")
        anchor = None if anchor is None else complex(anchor[0], anchor[1])
        return make_polygon(verts, bulges, kind=kind, anchor=anchor)
    if kind in PRESETS:
        fn, names = PRESETS[kind]
        params = source.get("params", {})
        if not isinstance(params, dict):
            raise DomainParseError("params: expected an object")
        unknown = set(params) - set(names)
        if unknown:
            raise DomainParseError(f"params.{sorted(unknown)[0]}: unknown parameter for {kind}")
        try:
            kwargs = {k: (int(v) if k == "n" else parse_number(v)) for k, v in params.items()}
        except (TypeError, ValueError) as exc:
            raise DomainParseError(f"params: invalid value for {kind}") from exc
        return fn(**kwargs)
    if kind == "curve":
        edges = tuple(edge_from_json(e) for e in source.get("edges", []))
        anchor = source.get("anchor")
        anchor = _centroid(edges) if anchor is None else complex(anchor[0], anchor[1])
        return _validate(DomainSpec("curve", edges, anchor, 1.0, {}))
    raise DomainParseError(f"kind: unknown domain kind {kind!r}")


def load_domain(path: str) -> DomainSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainParseError(f"invalid JSON in {path}: {exc}") from exc
    return build_domain(doc)


def transform(d: DomainSpec, scale: float, shift: complex) -> DomainSpec:
    """Image of d under z -> scale * z + shift (scale > 0)."""
    coeffs = (complex(scale), complex(shift), 0j, 1 + 0j)
    edges = tuple(map_edge(e, coeffs) for e in d.edges)
    return DomainSpec(d.kind, edges, scale * d.anchor + shift,
                      d.scale_applied * scale, d.params)


def map_edge(e, coeffs):
    """Image of an edge under a Mobius map; lines and circles stay exact."""
    a, b, c, dd = (complex(x) for x in coeffs)
    affine = c == 0
    if isinstance(e, Segment) and affine:
        return Segment(_mobius(coeffs, e.a), _mobius(coeffs, e.b))
    if isinstance(e, (Segment, Arc)):
        pa = complex(_mobius(coeffs, e.point(0.0)))
        pm = complex(_mobius(coeffs, e.point(0.5)))
        pb = complex(_mobius(coeffs, e.point(1.0)))
        return _arc_through(pa, pm, pb)
    if isinstance(e, EllipseCurve) and affine:
        rot = np.angle(a)
        return EllipseCurve(complex(_mobius(coeffs, e.center)), abs(a) * e.a,
                            abs(a) * e.b, e.rotation + float(rot))
    if isinstance(e, EllipseCurve) and e.is_circle:
        return _circle_image(e, coeffs)
    if isinstance(e, QuadBezier) and affine:
        return QuadBezier(*(complex(_mobius(coeffs, p)) for p in (e.p0, e.p1, e.p2)))
    return MappedEdge(e, tuple(complex(x) for x in coeffs))


def _arc_through(pa: complex, pm: complex, pb: complex):
    cross = ((pm - pa).conjugate() * (pb - pa)).imag
    scale = abs(pb - pa) * max(abs(pm - pa), abs(pb - pm))
    if abs(cross) <= 1e-13 * scale:
        return Segment(pa, pb)
    c = _circumcenter(pa, pm, pb)
    ba, bm, bb = (np.angle(p - c) for p in (pa, pm, pb))
    two_pi = 2 * math.pi
    ccw_m = (bm - ba) % two_pi
    ccw_b = (bb - ba) % two_pi
    sweep = ccw_b if ccw_m < ccw_b else -((ba - bb) % two_pi)
    return Arc(pa, pb, math.tan(sweep / 4))


def _circumcenter(p, q, r) -> complex:
    ax, ay, bx, by, cx, cy = p.real, p.imag, q.real, q.imag, r.real, r.imag
    dd = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / dd
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / dd
    return complex(ux, uy)


def _circle_image(e: EllipseCurve, coeffs):
    t = np.array([0.0, 1 / 3, 2 / 3])
    p = _mobius(coeffs, e.point(t))
    c = _circumcenter(*map(complex, p))
    r = abs(p[0] - c)
    return EllipseCurve(c, r, r, float(np.angle(p[0] - c)))


def rescale_to_normal(d: DomainSpec) -> DomainSpec:
    """Center d at the origin and shrink it into the disk of radius 1/2.

    A domain inside that disk has logarithmic capacity below 1, which keeps
    the discrete single layer operator positive definite. Domains that already
    fit are only translated (scale 1).
    """
    pts = d.sample(400)
    center = complex(0.5 * (pts.real.max() + pts.real.min()),
                     0.5 * (pts.imag.max() + pts.imag.min()))
    radius = float(np.abs(pts - center).max())
    for e in d.edges:
        # sampled polylines can miss arc extremes; bound with denser sampling
        radius = max(radius, float(np.abs(e.point(np.linspace(0, 1, 2001)) - center).max()))
    target = FIT_RADIUS - FIT_MARGIN
    scale = 1.0 if radius <= target else target / radius
    if scale == 1.0 and abs(center) < 1e-15:
        return d
    return transform(d, scale, -scale * center)


# ---------------------------------------------------------------------------
# Boundary mesh
# ---------------------------------------------------------------------------


class Panel(NamedTuple):
    edge: int
    t0: float
    t1: float
    level: int
    order: int
    start: int


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Boundary quadrature: nodes, arclength weights, tangents, normals.

    For Gauss panels, ``panels`` lists the parameter subintervals and the
    index of their first node; ``vertex_offsets[j]`` is the index of the first
    node on edge j (with a final entry equal to the node count).
    """

    domain: DomainSpec
    nodes: np.ndarray
    weights: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    speed: np.ndarray
    params: np.ndarray
    edge_index: np.ndarray
    panels: tuple
    vertex_offsets: np.ndarray
    rule: str
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def node_spacing(self) -> np.ndarray:
        """Local node spacing (arclength per node) at every node."""
        if self.rule == "trapezoid":
            return self.weights.copy()
        h = np.empty(self.n)
        for p in self.panels:
            sl = slice(p.start, p.start + p.order)
            h[sl] = self.weights[sl].sum() / p.order
        return h


def _edge_panels(n_base: int, levels: int, grade_start: bool, grade_end: bool):
    """Parameter breakpoints for one edge with dyadic grading at graded ends.

    Each graded end panel is halved ``levels`` times toward the end, so an
    edge graded at both ends has n_base + 2 * levels panels.
    """
    base = np.linspace(0.0, 1.0, n_base + 1)
    pieces = []
    for k in range(n_base):
        t0, t1 = base[k], base[k + 1]
        left = grade_start and k == 0
        right = grade_end and k == n_base - 1
        if n_base == 1 and left and right:
            mid = 0.5 * (t0 + t1)
            pieces += _graded_half(t0, mid, levels, toward="left")
            pieces += _graded_half(mid, t1, levels, toward="right")
        elif left:
            pieces += _graded_half(t0, t1, levels, toward="left")
        elif right:
            pieces += _graded_half(t0, t1, levels, toward="right")
        else:
            pieces.append((t0, t1, 0))
    return pieces


def _graded_half(t0, t1, levels, toward):
    out = []
    if toward == "left":
        hi = t1
        for lev in range(1, levels + 1):
            mid = t0 + (hi - t0) * 0.5
            out.append((mid, hi, lev - 1))
            hi = mid
        out.append((t0, hi, levels))
        return out[::-1]
    lo = t0
    for lev in range(1, levels + 1):
        mid = lo + (t1 - lo) * 0.5
        out.append((lo, mid, lev - 1))
        lo = mid
    out.append((lo, t1, levels))
    return out


def build_boundary_mesh(d: DomainSpec, panels_per_edge: int = 8, grading_levels: int = 8,
                        quad_order: int = 16, rule: str = "auto", n_nodes: int | None = None,
                        max_nodes: int = DEFAULT_MAX_NODES) -> BoundaryMesh:
    """Composite Gauss panels with dyadic grading toward every vertex.

    Smooth closed curves use the periodic trapezoid rule by default
    (``n_nodes`` points, defaulting to panels_per_edge * quad_order).
    """
    if panels_per_edge < 1:
        raise ValueError("panels_per_edge must be >= 1")
    if grading_levels < 0:
        raise ValueError("grading_levels must be >= 0")
    if not 2 <= quad_order <= 32:
        raise ValueError("quad_order must lie in [2, 32]")
    if rule == "auto":
        rule = "trapezoid" if d.smooth else "gauss"
    if rule == "trapezoid" and not d.smooth:
        raise ValueError("the trapezoid rule needs a smooth closed curve")
    if rule == "trapezoid":
        n = int(n_nodes or panels_per_edge * quad_order)
        if n > max_nodes:
            raise MeshResourceError(f"{n} nodes exceeds the cap of {max_nodes}")
        t = np.arange(n) / n
        return _assemble_mesh(d, t, np.full(n, 1.0 / n), np.zeros(n, dtype=int), (),
                              np.array([0, n]), rule, {"n_nodes": n})
    if rule != "gauss":
        raise ValueError(f"unknown rule {rule!r}")

    x, w = gauss_legendre(quad_order)
    perim = d.perimeter
    ts, ws, eidx, panels = [], [], [], []
    offsets = [0]
    start = 0
    graded = not d.smooth
    for j, e in enumerate(d.edges):
        length = edge_length(e)
        lev = grading_levels
        while lev > 0 and length / (panels_per_edge * 2**lev) < MIN_PANEL_FRACTION * perim:
            lev -= 1
        for t0, t1, level in _edge_panels(panels_per_edge, lev, graded, graded):
            half = 0.5 * (t1 - t0)
            ts.append(0.5 * (t0 + t1) + half * x)
            ws.append(half * w)
            eidx.append(np.full(quad_order, j))
            panels.append(Panel(j, t0, t1, level, quad_order, start))
            start += quad_order
        offsets.append(start)
    if start > max_nodes:
        raise MeshResourceError(f"{start} nodes exceeds the cap of {max_nodes}")
    meta = {"panels_per_edge": panels_per_edge, "grading_levels": grading_levels,
            "quad_order": quad_order}
    return _assemble_mesh(d, np.concatenate(ts), np.concatenate(ws), np.concatenate(eidx),
                          tuple(panels), np.array(offsets), rule, meta)


def _assemble_mesh(d, t, tw, eidx, panels, offsets, rule, meta) -> BoundaryMesh:
    n = len(t)
    z = np.empty(n, dtype=complex)
    z1 = np.empty(n, dtype=complex)
    z2 = np.empty(n, dtype=complex)
    for j, e in enumerate(d.edges):
        m = eidx == j
        z[m] = e.point(t[m])
        z1[m] = e.d1(t[m])
        z2[m] = e.d2(t[m])
    speed = np.abs(z1)
    tang = z1 / speed
    normals = -1j * tang
    kappa = np.imag(np.conj(z1) * z2) / speed**3
    weights = tw * speed
    meta = dict(meta, rule=rule, n_nodes=n)
    for arr in (z, weights, tang, normals, kappa, speed, t, eidx):
        arr.setflags(write=False)
    return BoundaryMesh(d, z, weights, tang, normals, kappa, speed, t, eidx, panels,
                        offsets, rule, meta)


# ---------------------------------------------------------------------------
# Area quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AreaQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    exactness: int
    anchor: complex


def check_star_shaped(d: DomainSpec, anchor: complex | None = None, samples: int = 2000) -> None:
    """Raise StarShapeError naming the first ray from the anchor that exits and re-enters."""
    a = d.anchor if anchor is None else anchor
    t = (np.arange(samples) + 0.5) / samples
    for j, e in enumerate(d.edges):
        z, dz = e.point(t), e.d1(t)
        cross = np.imag(np.conj(z - a) * dz)
        bad = np.nonzero(cross <= 0)[0]
        if bad.size:
            zb = z[bad[0]]
            ang = math.degrees(float(np.angle(zb - a)))
            raise StarShapeError(
                f"domain is not star-shaped about {a}: the ray at {ang:.3f} degrees "
                f"meets edge {j} tangentially or from outside at {zb:.6g}")


def build_area_quadrature(d: DomainSpec, radial_order: int = 24,
                          mesh: BoundaryMesh | None = None, **mesh_kwargs) -> AreaQuadrature:
    """Fan of curved triangles (anchor, boundary panel) with tensor Gauss rules.

    A point of the triangle over a boundary parameter t is
    z = anchor + s (gamma(t) - anchor), s in [0, 1], so
    dA = s Im(conj(gamma - anchor) gamma') ds dt.
    """
    check_star_shaped(d)
    if mesh is None:
        mesh = build_boundary_mesh(d, rule="gauss", **mesh_kwargs)
    if mesh.rule != "gauss":
        raise ValueError("area quadrature needs a Gauss-panel boundary mesh")
    a = d.anchor
    xs, ws = gauss_legendre(radial_order)
    s = 0.5 * (xs + 1.0)
    sw = 0.5 * ws
    gamma = mesh.nodes
    dgam = mesh.tangents * mesh.speed
    tw = mesh.weights / mesh.speed
    jac = np.imag(np.conj(gamma - a) * dgam)
    nodes = a + s[:, None] * (gamma - a)[None, :]
    weights = (sw * s)[:, None] * (tw * jac)[None, :]
    order = mesh.meta.get("quad_order", 16)
    exact = min(2 * radial_order - 2, 2 * order - 1)
    return AreaQuadrature(nodes.ravel(), weights.ravel(), exact, a)
