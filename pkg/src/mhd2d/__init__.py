"""Pseudospectral laboratory for a 2-D incompressible MHD system.

The package provides, on a periodic box:

- ``grid``: spectral substrate (transforms, derivatives, dealiasing),
- ``lp``: dyadic frequency analysis (isotropic / horizontal / vertical
  blocks, Besov-type and weighted-column norms, paraproducts),
- ``linear``: exact per-mode theory of the damped wave operator
  ``w_tt - Lap(w_t) - d1^2 w``,
- ``initial_data``: constructive admissible data (companion potential,
  volume constraint, flow-map seed),
- ``lagrangian``: the nonlinear flow-map solver,
- ``eulerian``: the direct perturbation-system solver,
- ``diagnostics``: energy-functional bookkeeping and decay fits,
- ``cli``: named experiment recipes with JSON configs.
"""

from mhd2d.grid import (
    Grid,
    RealField,
    SpectralField,
    dealias,
    from_spectral,
    inverse_laplacian,
    make_grid,
    spectral_derivative,
    to_spectral,
)

__all__ = [
    "Grid",
    "RealField",
    "SpectralField",
    "make_grid",
    "to_spectral",
    "from_spectral",
    "spectral_derivative",
    "inverse_laplacian",
    "dealias",
]

__version__ = "0.1.0"
