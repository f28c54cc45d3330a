"""Helmholtz fields and caustic geometry from path-length contour representations.

The package computes 2-D wave fields by complex contour integration in a
single path-length-like variable, extracts caustics from ray fans, locates
ghost poles and ghost sources through boundary-value degeneration scans,
and provides uniform cusp asymptotics plus perturbation-response
diagnostics.  A `caustica` console entry point drives the standard runs
from flat config files.
"""

from .profiles import (
    DomainError,
    PerturbationField,
    ProfileModel,
    constant,
    linear_squared,
    munk,
    perturbed_channel,
    quadratic_channel,
)

__version__ = "0.1.0"
