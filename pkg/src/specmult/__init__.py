"""Spectral multipliers of radial Schrodinger operators ``H = -Delta + V`` in three dimensions.

Modules
-------
radial
    Radial grids, fields, Lebesgue and Lorentz norms.
kato
    Potentials, Kato-class norms and splittings.
resolvent
    Free resolvent kernels, Born-series inversions and frequency thresholds.
oracle
    Finite-difference eigendecomposition used as ground truth.
multiplier
    Symbols, the energy-integral construction of ``m(H)`` and its dyadic pieces.
verify
    Numerical checks of the operator estimates.
nls
    Duhamel fixed-point solver for the quintic Schrodinger equation.
cli
    Batch runner.
"""

from .errors import (
    ClassMembershipError,
    DivergenceError,
    GridError,
    NoContractionError,
    ParameterError,
    RegimeError,
    SpecmultError,
    SpectralAssumptionError,
    SymbolError,
    ThresholdError,
)
from .kato import Potential, kato_split, potential_from_spec
from .multiplier import SymbolSpec, pb_assemble, scattering_states, stone_multiplier, symbol_from_spec
from .oracle import discretize_h, oracle_multiplier
from .radial import RadialField, RadialGrid, build_grid, lorentz_norm, lp_norm

__version__ = "0.1.0"

__all__ = [
    "ClassMembershipError",
    "DivergenceError",
    "GridError",
    "NoContractionError",
    "ParameterError",
    "RegimeError",
    "SpecmultError",
    "SpectralAssumptionError",
    "SymbolError",
    "ThresholdError",
    "Potential",
    "kato_split",
    "potential_from_spec",
    "SymbolSpec",
    "pb_assemble",
    "scattering_states",
    "stone_multiplier",
    "symbol_from_spec",
    "discretize_h",
    "oracle_multiplier",
    "RadialField",
    "RadialGrid",
    "build_grid",
    "lorentz_norm",
    "lp_norm",
]
