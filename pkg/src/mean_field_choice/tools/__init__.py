"""Mean-field choice tool modules."""

from . import calibration, metastability, simulation, solver

__all__ = [
    "calibration",
    "metastability",
    "simulation",
    "solver",
]
