"""Action, dual action and Nehari residual of radial profiles.

For a radial pair ``(u, v)`` the integrals evaluated here are

    kinetic   = 1/2 int (u' v + u v / r - u v') r dr,
    potential = int H(u, v) r dr,
    action    = kinetic - potential,
    dual      = 1/3 int H*(grad H(u, v)) r dr.

Since ``H`` is homogeneous of degree four, a critical point has
``u' v + u v / r - u v' = 4 H`` in the integrated sense, so
``2 kinetic = 4 potential`` and ``action = potential``. The Euler identity
``H*(grad H(p)) = 3 H(p)`` makes ``dual = potential`` for any profile, so
``dual_check`` compares the dual value with the action and vanishes only
at critical points.

Integrals use Simpson's rule in ``ln r`` on a log-uniform grid. Near the
origin the integrands are linear in ``r``, which gives an exact head term;
beyond the last node the tail is closed with a fitted power law.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import NonDecayingProfile, ValidationError
from .integrator import Profile, Termination
from .model import BetaParams, grad_G, hamiltonian, legendre, massless_field

__all__ = ["ActionReport", "action_value", "dual_check", "POINTS_PER_DECADE"]

POINTS_PER_DECADE = 256
TAIL_DECADES = 0.5
TAIL_FRACTION = 0.5
MAX_TAIL_EXPONENT = -1.5
_HT = 5e-3

# 7-point central first-derivative stencil in ln r, 6th order
_D1_OFFSETS = np.array([-3, -2, -1, 1, 2, 3], dtype=float)
_D1_WEIGHTS = np.array([-1 / 60, 3 / 20, -3 / 4, 3 / 4, -3 / 20, 1 / 60])


@dataclass(frozen=True)
class ActionReport:
    kinetic: float
    potential: float
    action: float
    dual_action: float
    nehari_residual: float

    def as_dict(self) -> dict:
        return asdict(self)


def _nodes(p: Profile):
    positive = p.grid[p.grid > 0]
    lo = float(positive[0]) * math.exp(4 * _HT)
    hi = p.r_end * math.exp(-4 * _HT)
    if not hi > lo:
        raise ValidationError("profile too short for quadrature")
    n = max(33, int(math.ceil(math.log10(hi / lo) * POINTS_PER_DECADE)) + 1)
    if n % 2 == 0:
        n += 1
    r = np.geomspace(lo, hi, n)
    r[0], r[-1] = lo, hi
    return r


def _derivatives(p: Profile, r, beta, how):
    u, v = p.sample(r)
    if how == "field":
        du, dv = massless_field((r, u, v), beta)
        return u, v, np.asarray(du), np.asarray(dv)
    if how != "profile":
        raise ValidationError(f"unknown derivative source {how!r}")
    rs = r[None, :] * np.exp(_D1_OFFSETS[:, None] * _HT)
    uv = p.sample(rs.ravel())
    us = uv[0].reshape(rs.shape)
    vs = uv[1].reshape(rs.shape)
    du = (_D1_WEIGHTS @ us) / _HT / r
    dv = (_D1_WEIGHTS @ vs) / _HT / r
    return u, v, du, dv


def _tail_exponent(r, g):
    n = max(8, int(TAIL_DECADES * POINTS_PER_DECADE))
    rr, gg = r[-n:], np.abs(g[-n:])
    if np.any(gg == 0) or not np.all(np.isfinite(gg)):
        return math.nan
    return float(np.polyfit(np.log(rr), np.log(gg), 1)[0])


def _integrate(r, g, name):
    """``int_0^inf g dr`` from nodes ``r`` with linear head and power-law tail."""
    body = simpson(g * r, x=np.log(r))
    head = 0.5 * g[0] * r[0]
    s = _tail_exponent(r, g)
    if not s < MAX_TAIL_EXPONENT:
        raise NonDecayingProfile(f"{name} integrand decays like r^{s:.3g}; need exponent < {MAX_TAIL_EXPONENT}")
    tail = g[-1] * r[-1] / (-s - 1.0)
    return float(head + body + tail)


def _check_decay(p: Profile):
    if p.termination != Termination.REACHED_R_MAX:
        raise NonDecayingProfile(f"profile terminated with {p.termination}")
    amp = np.hypot(p.u, p.v)
    if amp[-1] > TAIL_FRACTION * amp.max():
        raise NonDecayingProfile(f"tail amplitude {amp[-1]:.3g} exceeds {TAIL_FRACTION} of the maximum {amp.max():.3g}")


def action_value(p: Profile, beta: BetaParams | None = None, derivatives: str = "profile") -> ActionReport:
    """Kinetic, potential and dual integrals of a decaying massless profile.

    ``derivatives="profile"`` differentiates the profile's continuous
    representation (6th order in ``ln r``). ``"field"`` evaluates ``u'``
    and ``v'`` from the radial vector field instead; the kinetic integrand
    then equals ``4 H`` pointwise, so the Nehari residual only checks the
    quadrature.
    """
    beta = beta or p.beta
    if beta is None:
        raise ValidationError("beta is required")
    if p.massive is not None:
        raise ValidationError("action_value is defined for massless profiles")
    if not (np.any(p.u) or np.any(p.v)):
        return ActionReport(0.0, 0.0, 0.0, 0.0, 0.0)
    _check_decay(p)
    r = _nodes(p)
    u, v, du, dv = _derivatives(p, r, beta, derivatives)
    kin_density = 0.5 * (du * v + u * v / r - u * dv) * r
    pot_density = hamiltonian((u, v), beta) * r
    kinetic = _integrate(r, kin_density, "kinetic")
    potential = _integrate(r, pot_density, "potential")
    dual_action = _integrate(r, _dual_density(u, v, r, beta), "dual") / 3.0
    return ActionReport(
        kinetic=kinetic,
        potential=potential,
        action=kinetic - potential,
        dual_action=dual_action,
        nehari_residual=2.0 * kinetic - 4.0 * potential,
    )


def _dual_density(u, v, r, beta):
    w, z = grad_G((u, v), beta)
    hs = np.array([legendre((wi, zi), beta)[0] for wi, zi in zip(w, z)])
    return hs * r


def dual_check(p: Profile, beta: BetaParams | None = None, derivatives: str = "profile") -> float:
    """Relative gap ``|dual - action| / |action|``; zero at critical points."""
    rep = action_value(p, beta, derivatives)
    if rep.action == 0.0:
        return 0.0 if rep.dual_action == 0.0 else math.inf
    return abs(rep.dual_action - rep.action) / abs(rep.action)
