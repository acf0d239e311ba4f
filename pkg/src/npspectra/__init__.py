"""Fredholm eigenvalues of planar domains by two independent pipelines.

``layerpot`` discretizes the double and single layer operators on the
boundary (Nystrom); ``bergman`` and ``beurling`` build a Galerkin matrix of
the conjugated Beurling-type operator on orthonormal polynomials. ``bounds``
turns vertex angles into spectral bounds, and ``conformal`` provides Mobius
and Schwarz-Christoffel-type maps.
"""

from .geometry import build_area_quadrature, build_boundary_mesh, build_domain, rescale_to_normal
from .layerpot import SpectrumResult, nystrom_spectrum
from .beurling import BergmanConfig, bergman_spectrum

__all__ = ["build_domain", "rescale_to_normal", "build_boundary_mesh", "build_area_quadrature",
           "SpectrumResult", "nystrom_spectrum", "BergmanConfig", "bergman_spectrum"]
