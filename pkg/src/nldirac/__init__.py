"""Radial solutions of the planar cubic Dirac equation.

Massless weakly localized profiles, massive bound states by shooting, and
the action functionals evaluated on them.
"""

from .errors import NLDiracError
from .integrator import EventKind, IntegratorConfig, Profile, Termination
from .massive import BoundState, ShootKind, ShootOutcome, classify, decay_fit, find_bound_state
from .massless import asymptotic_fit, closed_form_profile, isotropic_closed_form, rescale, solve_massless, verify_profile
from .model import ISOTROPIC, BetaParams, MassiveParams, hamiltonian, legendre
from .variational import ActionReport, action_value, dual_check

__version__ = "0.1.0"

__all__ = [
    "NLDiracError",
    "EventKind",
    "IntegratorConfig",
    "Profile",
    "Termination",
    "BoundState",
    "ShootKind",
    "ShootOutcome",
    "classify",
    "decay_fit",
    "find_bound_state",
    "asymptotic_fit",
    "closed_form_profile",
    "isotropic_closed_form",
    "rescale",
    "solve_massless",
    "verify_profile",
    "ISOTROPIC",
    "BetaParams",
    "MassiveParams",
    "hamiltonian",
    "legendre",
    "ActionReport",
    "action_value",
    "dual_check",
]
