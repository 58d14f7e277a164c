"""Numerical checks of the stability and calibration of the Simons cone
inside a ball whose boundary is bumped along the cone's trace.

Modules
-------
numerics
    Tridiagonal eigensolver, bracketed roots, adaptive Runge-Kutta, quadrature.
geometry
    The O(4) x O(4) reduced picture: bumped boundary, generating curves,
    weighted area and volume, competitor curves.
spectral
    Radial Robin eigenproblems, the closed-form principal eigenvalue and the
    stability threshold, angular spectrum, compact analog.
calibration
    The foliation of the complement of the cone, its unit normal field and
    the flux identities behind the minimality comparison.
cli
    Batch front end writing JSON and CSV reports.
"""
from .errors import (BracketError, ConsistencyError, ConstraintError, ConvergenceError,
                     DomainError, InvalidInputError, SimonsConeError, SingularityError)
from .geometry import DomainParams, GeneratingCurve, ReducedRegion
from .numerics import Bracket, OdeState, TridiagonalSystem
from .spectral import AngularMode, EigenResult, RadialProblem, SweepReport

__version__ = "0.1.0"

__all__ = [
    "AngularMode", "Bracket", "BracketError", "ConsistencyError", "ConstraintError",
    "ConvergenceError", "DomainError", "DomainParams", "EigenResult", "GeneratingCurve",
    "InvalidInputError", "OdeState", "RadialProblem", "ReducedRegion", "SimonsConeError",
    "SingularityError", "SweepReport", "TridiagonalSystem",
]
