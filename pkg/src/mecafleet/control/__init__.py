"""Discrete LQR synthesis and trajectory tracking."""

from .dare import DareError, PlantModel, discretize, solve_dare
from .references import ReferencePoint, circle_reference, line_reference, waypoint_reference
from .tracker import LqrWeights, TrackingController

__all__ = [
    "PlantModel",
    "discretize",
    "solve_dare",
    "DareError",
    "ReferencePoint",
    "line_reference",
    "circle_reference",
    "waypoint_reference",
    "LqrWeights",
    "TrackingController",
]
