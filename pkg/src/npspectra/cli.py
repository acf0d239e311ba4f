"""Command-line front end: ``npspectra {spectrum,bounds,map,sweep,moments}``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bergman, beurling, bounds, conformal, geometry, layerpot

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

INPUT_ERRORS = (geometry.DomainParseError, geometry.GeometryError, geometry.MeshResourceError,
                bounds.BoundsError, conformal.SCSingularityError, beurling.PointLocationError,
                bergman.MomentError, FileNotFoundError, ValueError)
NUMERIC_ERRORS = (layerpot.CapacityError, layerpot.AssemblyError, beurling.BeurlingError,
                  conformal.AccuracyError, np.linalg.LinAlgError, FloatingPointError)

RANGES = {"panels": (1, 256), "grading": (0, 40), "quad_order": (2, 32),
          "degree": (0, bergman.MAX_DEGREE), "radial_order": (2, 64)}


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    domain: str | None = None
    method: str = "nystrom"
    panels: int = 4
    grading: int = 8
    quad_order: int = 16
    degree: int = 24
    radial_order: int = 24
    out: str | None = None
    format: str = "json"
    seed: int = 0
    tol: float = bounds.DEFAULT_TOL
    nodes: int | None = None
    prevertices: str | None = None
    angles: str | None = None
    samples: int = 400
    family: str = "rectangle"
    values: str = "1,1.5,2,2.5,2.76,3"

    def validate(self) -> "RunConfig":
        for name, (lo, hi) in RANGES.items():
            v = getattr(self, name)
            if not lo <= v <= hi:
                raise InputError(f"--{name.replace('_', '-')}={v} outside [{lo}, {hi}]")
        if self.tol <= 0:
            raise InputError("--tol must be positive")
        return self


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temporary file in the target directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _emit(cfg: RunConfig, artifacts: dict[str, str]) -> None:
    """Write artifacts {suffix: text}; a single artifact goes to --out itself."""
    if cfg.out is None:
        for text in artifacts.values():
            sys.stdout.write(text)
        return
    out = Path(cfg.out)
    if len(artifacts) == 1:
        atomic_write(out, next(iter(artifacts.values())))
        return
    for suffix, text in artifacts.items():
        atomic_write(out.with_name(f"{out.stem}.{suffix}"), text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _domain(cfg: RunConfig) -> geometry.DomainSpec:
    if cfg.domain is None:
        raise InputError("--domain is required")
    src = cfg.domain
    if src.endswith(".json") or os.path.isfile(src):
        return geometry.load_domain(src)
    return geometry.build_domain(src)


def run_nystrom(d: geometry.DomainSpec, cfg: RunConfig) -> layerpot.SpectrumResult:
    d = geometry.rescale_to_normal(d)
    mesh = geometry.build_boundary_mesh(d, panels_per_edge=cfg.panels, grading_levels=cfg.grading,
                                        quad_order=cfg.quad_order, n_nodes=cfg.nodes)
    return layerpot.nystrom_spectrum(mesh)


def run_bergman(d: geometry.DomainSpec, cfg: RunConfig) -> layerpot.SpectrumResult:
    bc = beurling.BergmanConfig(degree=cfg.degree, radial_order=cfg.radial_order,
                                panels_per_edge=cfg.panels, grading_levels=cfg.grading,
                                quad_order=cfg.quad_order)
    return beurling.bergman_spectrum(d, bc)


def _spectra(cfg: RunConfig, d) -> dict[str, layerpot.SpectrumResult]:
    runs = {"nystrom": run_nystrom, "bergman": run_bergman}
    if cfg.method == "both":
        return {m: runs[m](d, cfg) for m in ("nystrom", "bergman")}
    return {cfg.method: runs[cfg.method](d, cfg)}


def deviation_table(a: layerpot.SpectrumResult, b: layerpot.SpectrumResult, top: int = 10):
    """Rows (k, lambda_k nystrom, lambda_k bergman, difference) over the top positive eigenvalues."""
    x = np.sort(a.mean_zero[a.mean_zero > 0])[::-1][:top]
    y = np.sort(b.mean_zero[b.mean_zero > 0])[::-1][:top]
    m = min(x.size, y.size)
    return [(k + 1, float(x[k]), float(y[k]), float(abs(x[k] - y[k]))) for k in range(m)]


def cmd_spectrum(cfg: RunConfig) -> int:
    d = _domain(cfg)
    res = _spectra(cfg, d)
    arts = {}
    for name, r in res.items():
        arts[f"{name}.{cfg.format}"] = (r.to_json(cfg.seed) + "\n") if cfg.format == "json" \
            else r.to_csv()
    if len(res) == 2:
        rows = deviation_table(res["nystrom"], res["bergman"])
        header = ["k", "nystrom", "bergman", "abs_diff"]
        arts[f"deviation.{cfg.format}"] = _csv(rows, header) if cfg.format == "csv" else _dump(
            {"schema": layerpot.SCHEMA, "seed": cfg.seed,
             "rows": [dict(zip(header, r)) for r in rows]})
    _emit(cfg, arts)
    return EXIT_OK


def cmd_bounds(cfg: RunConfig) -> int:
    d = _domain(cfg)
    res = list(_spectra(cfg, d).values())
    rep = bounds.validate_domain(d, res, tol=cfg.tol)
    _emit(cfg, {"bounds.json": rep.to_json(cfg.seed) + "\n"})
    return EXIT_OK


def _numbers(text: str | None, what: str) -> list[float]:
    if not text:
        raise InputError(f"--{what} is required")
    return [geometry.parse_number(v) for v in text.split(",")]


def cmd_map(cfg: RunConfig) -> int:
    pre = _numbers(cfg.prevertices, "prevertices")
    ang = _numbers(cfg.angles, "angles")
    spec = conformal.SCMapSpec(np.exp(1j * np.asarray(pre)), ang)
    cert = conformal.convexity_certificate(spec)
    tr = conformal.trace_boundary(spec, samples=cfg.samples)
    rows = [(float(np.angle(w)), z.real, z.imag, b.real, b.imag)
            for w, z, b in zip(tr.w, tr.image, tr.bounded)]
    trace = _csv(rows, ["arg_w", "x", "y", "x_bounded", "y_bounded"])
    doc = {"schema": layerpot.SCHEMA, "seed": cfg.seed, "certificate": cert.to_dict(),
           "admissible": spec.admissible, "angle_sum": spec.angle_sum,
           "z0": [tr.z0.real, tr.z0.imag]}
    _emit(cfg, {"trace.csv": trace, "certificate.json": _dump(doc)})
    return EXIT_OK


def _family(name: str, value: float) -> geometry.DomainSpec:
    if name == "rectangle":
        return geometry.rectangle(value, 1.0)
    if name == "regular_ngon":
        return geometry.regular_ngon(int(value))
    if name == "truncated_wedge":
        return geometry.truncated_wedge(value)
    if name == "lens":
        return geometry.lens(value, value)
    raise InputError(f"unknown sweep family {name!r}")


def cmd_sweep(cfg: RunConfig) -> int:
    rows = []
    for v in _numbers(cfg.values, "values"):
        d = _family(cfg.family, v)
        res = list(_spectra(cfg, d).values())
        rep = bounds.validate_domain(d, res, tol=cfg.tol)
        rows.append((v, rep.computed_radius, rep.kuhnau_lower,
                     "" if rep.essbound_upper is None else rep.essbound_upper))
    _emit(cfg, {"sweep.csv": _csv(rows, ["parameter", "spectral_radius", "kuhnau_lower",
                                         "essbound_upper"])})
    return EXIT_OK


def cmd_moments(cfg: RunConfig) -> int:
    d = geometry.rescale_to_normal(_domain(cfg))
    mesh = geometry.build_boundary_mesh(d, panels_per_edge=cfg.panels, grading_levels=cfg.grading,
                                        quad_order=cfg.quad_order, rule="gauss")
    mt = bergman.boundary_moments(mesh, cfg.degree)
    C = bergman.orthonormal_basis(mt)
    doc = {"schema": layerpot.SCHEMA, "seed": cfg.seed, "domain": d.kind,
           "moments": mt.to_dict(), "basis": C.to_dict()}
    _emit(cfg, {"moments.json": _dump(doc)})
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "bounds": cmd_bounds, "map": cmd_map,
            "sweep": cmd_sweep, "moments": cmd_moments}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="npspectra", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="subcommand", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--domain", help="preset such as 'ellipse:2,1' or a JSON file")
    common.add_argument("--method", choices=["nystrom", "bergman", "both"], default="nystrom")
    common.add_argument("--panels", type=int, default=4, help="Gauss panels per edge")
    common.add_argument("--grading", type=int, default=8, help="dyadic grading levels per corner")
    common.add_argument("--quad-order", type=int, default=16)
    common.add_argument("--nodes", type=int, default=None,
                        help="trapezoid nodes for smooth curves (default panels * quad-order)")
    common.add_argument("--degree", type=int, default=24, help="Bergman polynomial degree")
    common.add_argument("--radial-order", type=int, default=24)
    common.add_argument("--out", default=None, help="output path (stdout if omitted)")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=bounds.DEFAULT_TOL)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "map":
            p.add_argument("--prevertices", help="prevertex arguments, e.g. '0,pi'")
            p.add_argument("--angles", help="interior angles, last one at infinity")
            p.add_argument("--samples", type=int, default=400)
        if name == "sweep":
            p.add_argument("--family", default="rectangle",
                           choices=["rectangle", "regular_ngon", "truncated_wedge", "lens"])
            p.add_argument("--values", default="1,1.5,2,2.5,2.76,3")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    kw = {k: v for k, v in vars(ns).items() if k in RunConfig.__dataclass_fields__}
    return RunConfig(**kw).validate()


def _thread_limit():
    raw = os.environ.get("NPSPECTRA_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError as exc:
        raise InputError(f"NPSPECTRA_THREADS={raw!r} is not an integer") from exc
    if n < 1:
        raise InputError("NPSPECTRA_THREADS must be >= 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        limiter = _thread_limit()
        try:
            with np.errstate(all="ignore"):
                return COMMANDS[cfg.subcommand](cfg)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except NUMERIC_ERRORS as exc:
        print(f"npspectra: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except INPUT_ERRORS as exc:
        print(f"npspectra: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
