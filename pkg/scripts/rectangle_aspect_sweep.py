"""Spectral radius of w x 1 rectangles against the aspect ratio w.

The radius sits at the corner value 1/2 near the square and leaves it once
the aspect ratio is large enough.

Usage: python3 scripts/rectangle_aspect_sweep.py [--values 1,1.5,2,2.5,2.76,3,4]
"""

import argparse

import numpy as np

from npspectra import geometry, layerpot


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--values", default="1,1.5,2,2.5,2.76,3,4")
    ap.add_argument("--grading", type=int, default=8)
    args = ap.parse_args()
    print("aspect,spectral_radius,next_abs_eigenvalue,excess_over_half")
    for w in (float(v) for v in args.values.split(",")):
        d = geometry.rescale_to_normal(geometry.rectangle(w, 1.0))
        mesh = geometry.build_boundary_mesh(d, panels_per_edge=4, grading_levels=args.grading)
        r = layerpot.nystrom_spectrum(mesh)
        mz = np.sort(np.abs(r.mean_zero))[::-1]  # mz[0], mz[1] are the +- pair
        print(f"{w:g},{r.spectral_radius:.6f},{mz[2]:.6f},{r.spectral_radius - 0.5:+.4f}")


if __name__ == "__main__":
    main()
