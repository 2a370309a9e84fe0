"""Denjoy counterexamples for rotation actions of Z^d, built numerically.

Moduli of continuity, length schemes over orbits, the blown-up circle, the
resulting C^1 diffeomorphisms and numerical checks of their properties.
"""

from .modulus import DomainError, Modulus, parse_modulus
from .orbit import GroupElement, RotationAction, THETA_PRESETS, parse_theta
from .lengths import InadmissibleSchemeError, LengthScheme, admissible_herman, total_mass
from .blowup import BlowupModel, CorruptModelError
from .diffeo import DiffeoAction, YoccozMap, xi, xi_integral
from .verify import CheckReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "BlowupModel", "CheckReport", "CorruptModelError", "DiffeoAction", "DomainError",
    "GroupElement", "InadmissibleSchemeError", "LengthScheme", "Modulus", "RotationAction",
    "THETA_PRESETS", "YoccozMap", "admissible_herman", "parse_modulus", "parse_theta",
    "run_suite", "total_mass", "xi", "xi_integral",
]
