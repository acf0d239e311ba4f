"""Do domains with the same interior angles share a spectral radius?

Experiment only: pairs of domains with identical angle lists are compared,
rectangles of varying aspect (all angles pi/2) and two-vertex lenses whose
sides are circular arcs or quadratic Bezier curves.

Usage: python3 scripts/conjecture_sweep.py [--grading 8]
"""

import argparse
import math

from npspectra import geometry, layerpot
from npspectra.bounds import essbound_check, kuhnau_lower_bound


def radius(d, grading):
    d = geometry.rescale_to_normal(d)
    mesh = geometry.build_boundary_mesh(d, panels_per_edge=4, grading_levels=grading)
    return layerpot.nystrom_spectrum(mesh).spectral_radius


def circular_lens(theta):
    b = math.tan(theta / 4)
    return geometry.make_polygon([-1, 1], [b, b], kind="arc_polygon")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grading", type=int, default=8)
    args = ap.parse_args()
    print("family,shape,angles_over_pi,spectral_radius,kuhnau_lower,essbound_upper")
    rows = [("rectangle", f"{w:g}x1", geometry.rectangle(w, 1.0)) for w in (1, 1.5, 2, 3)]
    for th in (math.pi / 3, math.pi / 2, 2 * math.pi / 3):
        rows.append(("lens", f"circular {th / math.pi:.3f}pi", circular_lens(th)))
        rows.append(("lens", f"bezier {th / math.pi:.3f}pi", geometry.lens(th, th)))
    for fam, label, d in rows:
        th = geometry.interior_angles(d)
        eb = essbound_check(th)
        ang = "/".join(f"{t / math.pi:.3f}" for t in th)
        print(f"{fam},{label},{ang},{radius(d, args.grading):.6f},{kuhnau_lower_bound(th):.4f},"
              f"{'' if eb is None else f'{eb.upper:.4f}'}")


if __name__ == "__main__":
    main()
