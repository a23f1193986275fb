"""brouwerkit: numerical Brouwer degree and regularity diagnostics for Sobolev maps.

Modules
-------
domain      boxes, balls, boundary meshes, tubular projection
fields      maps, Jacobians, quadrature, Sobolev energies, sphere traces
degree      degree by counting, by the bump integral, and from boundary data
regularity  E-rasters, F-sets, essential oscillation, continuity scans
bmo         BMO/VMO estimates, mollification, VMO degree
mapzoo      preset maps, fixtures, surfaces and energies
cli         command line interface
"""
__version__ = "0.1.0"

from . import kernels  # noqa: E402
from .errors import *  # noqa: E402,F401,F403

BACKEND = kernels.BACKEND
