"""Explicit-kernel solver for the Stokes and Navier-Stokes systems on the half space."""

from .domain import BoundaryField, GridSpec, SpaceTimeField, load_field, make_grid, save_field
from .extension import CompatibilityError, check_compatibility
from .navier_stokes import (
    HorizonUnderflow,
    IterationConfig,
    IterationTrace,
    NonContraction,
    auto_timestep,
    picard_solve,
)
from .stokes import StokesData, StokesSolution, solve_stokes

__all__ = [
    "BoundaryField",
    "GridSpec",
    "SpaceTimeField",
    "load_field",
    "make_grid",
    "save_field",
    "CompatibilityError",
    "check_compatibility",
    "HorizonUnderflow",
    "IterationConfig",
    "IterationTrace",
    "NonContraction",
    "auto_timestep",
    "picard_solve",
    "StokesData",
    "StokesSolution",
    "solve_stokes",
]

__version__ = "0.1.0"
