"""Phase model of a three-pulse light-pulse atom interferometer."""
from .model import (AtomSpecies, InitialKinematics, LaserDrive, QuadraticPotential, Scenario,
                    velocity_spread_from_selection)
from .pulses import GaussianShape, PulseSequence, RectangularShape, TabulatedShape
from .quadrature import QuadratureError

__all__ = [
    "AtomSpecies", "InitialKinematics", "LaserDrive", "QuadraticPotential", "Scenario",
    "velocity_spread_from_selection", "GaussianShape", "PulseSequence", "RectangularShape",
    "TabulatedShape", "QuadratureError",
]
__version__ = "0.1.0"
