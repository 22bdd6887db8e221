"""Quartic Hamiltonian, radial vector fields and the convex conjugate.

The Hamiltonian is

    H(u, v) = beta1/4 (u^4 + v^4) + beta2 u^2 v^2,

and the radial reduction of the cubic Dirac equation reads

    u' + u/r = dH/dv,    v' = -dH/du.

The functions operating on ``(u, v)`` pairs accept scalars or numpy arrays
and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BetaOrderError, NewtonDivergence, OmegaOutOfGap, SingularRadius, ValidationError

__all__ = [
    "BetaParams",
    "TrajectoryState",
    "MassiveParams",
    "DualPoint",
    "hamiltonian",
    "grad_G",
    "hessian",
    "det_hessian",
    "legendre",
    "massless_field",
    "limit_field",
    "massive_field",
    "massive_hamiltonian",
    "ISOTROPIC",
]

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class BetaParams:
    """Nonlinearity couplings with ``0 < beta2 <= beta1``."""

    beta1: float
    beta2: float

    def __post_init__(self):
        b1, b2 = float(self.beta1), float(self.beta2)
        if not (math.isfinite(b1) and math.isfinite(b2)):
            raise ValidationError(f"beta must be finite, got ({b1}, {b2})")
        if b2 <= 0 or b1 <= 0:
            raise ValidationError(f"beta must be positive, got ({b1}, {b2})")
        if b2 > b1:
            raise BetaOrderError(f"need beta2 <= beta1, got ({b1}, {b2})")
        object.__setattr__(self, "beta1", b1)
        object.__setattr__(self, "beta2", b2)

    def as_tuple(self) -> tuple[float, float]:
        return (self.beta1, self.beta2)


ISOTROPIC = BetaParams(1.0, 0.5)


@dataclass(frozen=True)
class TrajectoryState:
    r: float
    u: float
    v: float

    def __post_init__(self):
        if not self.r >= 0:
            raise ValidationError(f"radius must be nonnegative, got {self.r}")
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValidationError("state components must be finite")

    @property
    def uv(self) -> tuple[float, float]:
        return (self.u, self.v)


@dataclass(frozen=True)
class MassiveParams:
    """Mass ``m > 0`` and frequency ``omega`` inside the gap ``(-m, m)``."""

    m: float
    omega: float

    def __post_init__(self):
        m, w = float(self.m), float(self.omega)
        if not (math.isfinite(m) and math.isfinite(w)):
            raise ValidationError("mass and frequency must be finite")
        if m <= 0:
            raise ValidationError(f"mass must be positive, got {m}")
        if not -m < w < m:
            raise OmegaOutOfGap(f"omega={w} outside the gap (-{m}, {m})")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "omega", w)

    @property
    def kappa(self) -> float:
        """Decay rate sqrt(m^2 - omega^2) of the linearization at the origin."""
        return math.sqrt((self.m - self.omega) * (self.m + self.omega))


@dataclass(frozen=True)
class DualPoint:
    w: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.w) and math.isfinite(self.z)):
            raise ValidationError("dual point must be finite")


def hamiltonian(s, beta: BetaParams):
    u, v = s
    u2, v2 = u * u, v * v
    return 0.25 * beta.beta1 * (u2 * u2 + v2 * v2) + beta.beta2 * u2 * v2


def grad_G(s, beta: BetaParams):
    """Gradient of the Hamiltonian, ``(dH/du, dH/dv)``."""
    u, v = s
    u2, v2 = u * u, v * v
    return (u * (beta.beta1 * u2 + 2.0 * beta.beta2 * v2), v * (2.0 * beta.beta2 * u2 + beta.beta1 * v2))


def hessian(s, beta: BetaParams) -> np.ndarray:
    u, v = float(s[0]), float(s[1])
    b1, b2 = beta.beta1, beta.beta2
    off = 4.0 * b2 * u * v
    return np.array([[3.0 * b1 * u * u + 2.0 * b2 * v * v, off], [off, 2.0 * b2 * u * u + 3.0 * b1 * v * v]])


def det_hessian(s, beta: BetaParams):
    u, v = s
    u2, v2 = u * u, v * v
    b1, b2 = beta.beta1, beta.beta2
    return 6.0 * b1 * b2 * (u2 * u2 + v2 * v2) + (9.0 * b1 * b1 - 12.0 * b2 * b2) * u2 * v2


def legendre(q, beta: BetaParams, tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER):
    """Convex conjugate H*(q) and its maximizer.

    Solves ``grad H(p) = q`` by damped Newton. The residual tolerance is
    relative to ``|q|``.

    Returns ``(value, (u, v))``.
    """
    if isinstance(q, DualPoint):
        w, z = q.w, q.z
    else:
        w, z = float(q[0]), float(q[1])
    qn = math.hypot(w, z)
    if qn == 0.0:
        return 0.0, (0.0, 0.0)
    # exact inverse of grad(beta1/4 |p|^4)
    scale = 1.0 / (beta.beta1 ** (1.0 / 3.0) * qn ** (2.0 / 3.0))
    p = np.array([w * scale, z * scale])
    target = np.array([w, z])

    def residual(p):
        return np.array(grad_G(p, beta)) - target

    res = residual(p)
    rnorm = float(np.linalg.norm(res))
    thresh = tol * qn
    for _ in range(max_iter):
        if rnorm <= thresh:
            break
        step = np.linalg.solve(hessian(p, beta), res)
        t = 1.0
        while True:
            trial = p - t * step
            tres = residual(trial)
            tnorm = float(np.linalg.norm(tres))
            if tnorm < rnorm or t < 1e-10:
                break
            t *= 0.5
        if tnorm >= rnorm:
            # no descent possible at this precision
            break
        p, res, rnorm = trial, tres, tnorm
    if rnorm > thresh:
        raise NewtonDivergence(f"legendre Newton stalled at residual {rnorm:.3e} for q=({w}, {z})")
    u, v = float(p[0]), float(p[1])
    value = u * w + v * z - hamiltonian((u, v), beta)
    return value, (u, v)


def _unpack(s):
    if isinstance(s, TrajectoryState):
        return s.r, s.u, s.v
    r, u, v = s
    return r, u, v


def massless_field(s, beta: BetaParams):
    r, u, v = _unpack(s)
    if not np.all(np.asarray(r) > 0):
        raise SingularRadius(f"massless field is singular at r={r}")
    u2, v2 = u * u, v * v
    return (v * (2.0 * beta.beta2 * u2 + beta.beta1 * v2) - u / r, -u * (beta.beta1 * u2 + 2.0 * beta.beta2 * v2))


def limit_field(s, beta: BetaParams):
    u, v = s
    u2, v2 = u * u, v * v
    return (v * (2.0 * beta.beta2 * u2 + beta.beta1 * v2), -u * (beta.beta1 * u2 + 2.0 * beta.beta2 * v2))


def massive_field(s, beta: BetaParams, mp: MassiveParams):
    r, u, v = _unpack(s)
    if not np.all(np.asarray(r) > 0):
        raise SingularRadius(f"massive field is singular at r={r}")
    u2, v2 = u * u, v * v
    du = (2.0 * beta.beta2 * u2 + beta.beta1 * v2) * v - (mp.m - mp.omega) * v - u / r
    dv = -(beta.beta1 * u2 + 2.0 * beta.beta2 * v2) * u - (mp.m + mp.omega) * u
    return (du, dv)


def massive_hamiltonian(s, beta: BetaParams, mp: MassiveParams):
    """Energy of the autonomous massive flow; non-increasing along the radial one.

    ``H(u, v) + (m + omega) u^2 / 2 - (m - omega) v^2 / 2``. The origin is a
    saddle of this function, and the set where it is negative consists of
    two lobes that never touch ``v = 0``.
    """
    u, v = s
    return hamiltonian(s, beta) + 0.5 * (mp.m + mp.omega) * u * u - 0.5 * (mp.m - mp.omega) * v * v
