"""Weakly localized solutions of the massless radial system.

Solutions start from ``u(0) = 0, v(0) = lam`` and decay like ``u ~ l/r``,
``v ~ c2/r^2``. For ``beta = (1, 1/2)`` the family is known in closed form,

    u(r) = lam d r / (1 + d^2 r^2),   v(r) = lam / (1 + d^2 r^2),   d = lam^2 / 2,

which serves as the oracle for everything else in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProfile, NumericalFailure, StepUnderflow, TrivialLambda, ValidationError, WindowTooShort
from .integrator import (
    IntegratorConfig,
    Profile,
    Termination,
    default_r_start,
    integrate,
    log_resample,
    massless_rhs,
    series_start,
)
from .model import ISOTROPIC, BetaParams, hamiltonian

__all__ = [
    "AsymptoticFit",
    "ScaleFactor",
    "VerificationReport",
    "massless_config",
    "asymptotic_config",
    "solve_massless",
    "isotropic_closed_form",
    "closed_form_profile",
    "asymptotic_fit",
    "rescale",
    "verify_profile",
    "ORACLE_R_MAX",
    "ASYMPTOTIC_R_MAX",
]

ORACLE_R_MAX = 50.0
ASYMPTOTIC_R_MAX = 1e3
FIT_FLOOR = 1e-30

# 7-point central first-derivative stencil, 6th order
_D1_OFFSETS = np.array([-3, -2, -1, 1, 2, 3], dtype=float)
_D1_WEIGHTS = np.array([-1 / 60, 3 / 20, -3 / 4, 3 / 4, -3 / 20, 1 / 60])
# 11-point stencil, 10th order; a wider step keeps rounding out of the PDE check
_D10_OFFSETS = np.array([-5, -4, -3, -2, -1, 1, 2, 3, 4, 5], dtype=float)
_D10_WEIGHTS = np.array([-1 / 1260, 5 / 504, -5 / 84, 5 / 21, -5 / 6, 5 / 6, -5 / 21, 5 / 84, -5 / 504, 1 / 1260])


@dataclass(frozen=True)
class AsymptoticFit:
    l: float
    c2: float
    slope_u: float
    slope_v: float
    fit_window: tuple[float, float]
    residual_u: float
    residual_v: float
    residual_bound: float = 0.05
    n_points: int = 0

    @property
    def ok(self) -> bool:
        return max(self.residual_u, self.residual_v) <= self.residual_bound


@dataclass(frozen=True)
class ScaleFactor:
    delta: float

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValidationError(f"scale factor must be positive, got {self.delta}")


def massless_config(
    lam: float,
    beta: BetaParams | None = None,
    r_max: float = ORACLE_R_MAX,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-20,
    r_start: float | None = None,
) -> IntegratorConfig:
    """Run configuration; ``abs_tol`` is tiny since neither component crosses zero."""
    if r_start is None:
        r_start = default_r_start(lam, beta, tol=rel_tol)
    return IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol, r_start=r_start, r_max=r_max)


def asymptotic_config(lam: float, beta: BetaParams | None = None, r_max: float = ASYMPTOTIC_R_MAX) -> IntegratorConfig:
    """Tight tolerances for long runs.

    In the tail ``v ~ 1/r^2`` is the remainder of ``lam`` minus an integral,
    so its relative accuracy at ``r = 1000`` is roughly ``rel_tol * 1e7``.
    """
    return massless_config(lam, beta, r_max=r_max, rel_tol=1e-13, abs_tol=1e-24)


def solve_massless(lam: float, beta: BetaParams, cfg: IntegratorConfig | None = None) -> Profile:
    """Integrate the massless radial system for ``v(0) = lam``."""
    if lam == 0:
        raise TrivialLambda("lambda = 0 gives the trivial solution")
    if cfg is None:
        cfg = massless_config(lam, beta)
    start = series_start(lam, cfg.r_start, beta, tol=cfg.rel_tol)
    p, _ = integrate(massless_rhs(beta), start, cfg, lam=lam, beta=beta)
    if p.termination is Termination.STEP_UNDERFLOW:
        raise StepUnderflow(f"step underflow at r={p.r_end:.6g}")
    if p.termination is not Termination.REACHED_R_MAX:
        raise NumericalFailure(f"massless run ended with {p.termination.value} at r={p.r_end:.6g}")
    return p


def isotropic_closed_form(lam, r):
    """Exact solution for ``beta = (1, 1/2)`` with ``v(0) = lam``."""
    r = np.asarray(r, dtype=float)
    d = 0.5 * lam * lam
    den = 1.0 + (d * r) ** 2
    u = lam * d * r / den
    v = lam / den
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def closed_form_profile(lam: float, grid) -> Profile:
    grid = np.asarray(grid, dtype=float)
    u, v = isotropic_closed_form(lam, grid)

    def dense(r, _lam=lam):
        uu, vv = isotropic_closed_form(_lam, np.atleast_1d(r))
        return np.vstack([uu, vv])

    return Profile(grid, u, v, lam, ISOTROPIC, None, Termination.REACHED_R_MAX, dense)


def asymptotic_fit(p: Profile, window=None, residual_bound: float = 0.05) -> AsymptoticFit:
    """Power-law fit of ``|u|`` and ``|v|`` against ``r`` over ``window``.

    The window is resampled at 64 points per decade; ``l`` and ``c2`` are
    medians of ``r|u|`` and ``r^2|v|`` over it.
    """
    if window is None:
        window = (0.5 * p.r_end, p.r_end)
    r_lo, r_hi = float(window[0]), float(window[1])
    if not (r_lo < r_hi and r_lo >= p.r_start * (1 - 1e-12) and r_hi <= p.r_end * (1 + 1e-12)):
        raise WindowTooShort(f"window ({r_lo}, {r_hi}) not inside profile [{p.r_start}, {p.r_end}]")
    q = log_resample(p, 64, r_lo, r_hi)
    if q.grid.size < 10:
        raise WindowTooShort(f"only {q.grid.size} points in window ({r_lo}, {r_hi})")
    au, av = np.abs(q.u), np.abs(q.v)
    if np.any(au < FIT_FLOOR) or np.any(av < FIT_FLOOR):
        raise DegenerateProfile("samples below 1e-30 in fit window")
    x = np.log(q.grid)
    fu = np.polyfit(x, np.log(au), 1)
    fv = np.polyfit(x, np.log(av), 1)
    res_u = float(np.max(np.abs(np.polyval(fu, x) - np.log(au))))
    res_v = float(np.max(np.abs(np.polyval(fv, x) - np.log(av))))
    return AsymptoticFit(
        l=float(np.median(q.grid * au)),
        c2=float(np.median(q.grid**2 * av)),
        slope_u=float(fu[0]),
        slope_v=float(fv[0]),
        fit_window=(r_lo, r_hi),
        residual_u=res_u,
        residual_v=res_v,
        residual_bound=residual_bound,
        n_points=int(q.grid.size),
    )


def rescale(p: Profile, delta) -> Profile:
    """Apply ``psi -> sqrt(delta) psi(delta .)``.

    A sample at radius ``r`` moves to ``r / delta`` with amplitude scaled by
    ``sqrt(delta)``; no interpolation is involved.
    """
    d = delta.delta if isinstance(delta, ScaleFactor) else ScaleFactor(float(delta)).delta
    s = math.sqrt(d)
    dense = None
    if p.dense is not None:
        base = p.dense

        def dense(r, _base=base, _d=d, _s=s):
            return _s * np.asarray(_base(np.asarray(r, dtype=float) * _d)).reshape(2, -1)

    lam = None if p.lam is None else s * p.lam
    return Profile(p.grid / d, s * p.u, s * p.v, lam, p.beta, p.massive, p.termination, dense)


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    identity_residual: float
    monotonicity_violations: int
    positivity_violations: int
    decay_lower_constants: list
    decay_upper_constants: list
    decay_bounds_ok: bool
    fd_residual_ruv: float
    fd_residual_r2H: float
    pde_residual: float
    tolerances: dict
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "identity_residual": self.identity_residual,
            "monotonicity_violations": self.monotonicity_violations,
            "positivity_violations": self.positivity_violations,
            "decay_lower_constants": list(self.decay_lower_constants),
            "decay_upper_constants": list(self.decay_upper_constants),
            "decay_bounds_ok": self.decay_bounds_ok,
            "fd_residual_ruv": self.fd_residual_ruv,
            "fd_residual_r2H": self.fd_residual_r2H,
            "pde_residual": self.pde_residual,
            "tolerances": dict(self.tolerances),
            "violations": list(self.violations),
            "passed": self.passed,
        }


def identity_residual(p: Profile) -> float:
    """max |uv - 2rH| / max(|uv|, |2rH|) over the grid."""
    uv = p.u * p.v
    two_rH = 2.0 * p.grid * p.H
    scale = np.maximum(np.abs(uv), np.abs(two_rH))
    mask = scale > 0
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(uv - two_rH)[mask] / scale[mask]))


def energy_violations(p: Profile, rel_tol: float, abs_tol: float) -> int:
    H = p.H
    slack = 10.0 * (abs_tol + rel_tol * H[:-1])
    return int(np.count_nonzero(H[1:] > H[:-1] + slack))


def positivity_violations(p: Profile) -> int:
    sign = 1.0
    if p.lam is not None and p.lam != 0:
        sign = math.copysign(1.0, p.lam)
    elif p.v[0] != 0:
        sign = math.copysign(1.0, p.v[0])
    inner = p.grid > 0
    bad = (sign * p.u[inner] <= 0) | (sign * p.v[inner] <= 0)
    return int(np.count_nonzero(bad))


def _decay_bounds(p: Profile, n_windows: int = 4):
    """Tail windows: min of r^2 |psi|^2 and max of r |psi|^2 per window."""
    r_tail = max(p.r_start, p.r_end / 10.0)
    edges = np.geomspace(r_tail, p.r_end, n_windows + 1)
    lower, upper = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        m = (p.grid >= a) & (p.grid <= b)
        if not m.any():
            continue
        rho2 = p.u[m] ** 2 + p.v[m] ** 2
        lower.append(float(np.min(p.grid[m] ** 2 * rho2)))
        upper.append(float(np.max(p.grid[m] * rho2)))
    if not lower:
        return lower, upper, False
    ok = lower[0] > 0 and all(x >= 0.5 * lower[0] for x in lower) and all(x <= 2.0 * upper[0] for x in upper)
    return lower, upper, ok


def _log_derivative_points(p: Profile, n_per_decade: int = 16, ht: float = 5e-3):
    """Radii where a 7-point stencil in ln r stays inside the profile."""
    lo = max(p.r_start, p.grid[p.grid > 0][0]) * math.exp(4 * ht)
    hi = p.r_end * math.exp(-4 * ht)
    if hi <= lo:
        return np.array([])
    n = max(8, int(math.ceil(math.log10(hi / lo) * n_per_decade)))
    return np.geomspace(lo, hi, n)


def derivative_identity_residuals(p: Profile, beta: BetaParams | None = None, ht: float = 5e-3):
    """Finite-difference residuals of d(ruv)/dr and d(r^2 H)/dr.

    Derivatives are 6th-order central differences in ``ln r`` of the profile's
    continuous representation. Returns the max relative residuals.
    """
    beta = beta or p.beta
    r = _log_derivative_points(p, ht=ht)
    if r.size == 0:
        return math.nan, math.nan
    rs = r[None, :] * np.exp(_D1_OFFSETS[:, None] * ht)  # (6, m)
    uv = p.sample(rs.ravel())
    u_s = uv[0].reshape(rs.shape)
    v_s = uv[1].reshape(rs.shape)
    F1 = rs * u_s * v_s
    F2 = rs**2 * hamiltonian((u_s, v_s), beta)
    dF1 = (_D1_WEIGHTS @ F1) / ht / r
    dF2 = (_D1_WEIGHTS @ F2) / ht / r
    u0, v0 = p.sample(r)
    b1 = beta.beta1
    rhs1 = b1 * r * (v0**4 - u0**4)
    rhs2 = 0.5 * rhs1
    mag = b1 * r * (v0**4 + u0**4)
    with np.errstate(invalid="ignore", divide="ignore"):
        e1 = np.abs(dF1 - rhs1) / (np.abs(dF1) + mag)
        e2 = np.abs(dF2 - rhs2) / (np.abs(dF2) + 0.5 * mag)
    e1 = e1[np.isfinite(e1)]
    e2 = e2[np.isfinite(e2)]
    return (float(e1.max()) if e1.size else 0.0, float(e2.max()) if e2.size else 0.0)


def pde_residual(p: Profile, beta: BetaParams | None = None, n_radii: int = 24, rel_h: float = 1e-2) -> float:
    """Residual of ``D psi = grad G(psi)`` in Cartesian coordinates.

    The spinor ``(i u(r) e^{i theta}, v(r))`` is rebuilt on the plane and
    differentiated by central differences in ``x1`` and ``x2``, so the check
    does not go through the polar reduction.
    """
    beta = beta or p.beta
    # below the core the step is tied to the core radius, not to r: a step
    # proportional to r loses everything to rounding where v is flat
    r_peak = float(p.grid[np.argmax(np.abs(p.u))])
    r_first = max(p.r_start, p.grid[p.grid > 0][0])
    lo = max(r_first * (1 + 6 * rel_h), r_first + 6 * rel_h * r_peak) * 1.01
    hi = p.r_end / (1 + 6 * rel_h) / 1.01
    if hi <= lo:
        return math.nan
    radii = np.geomspace(lo, hi, n_radii)
    thetas = 0.4 + 2 * math.pi * np.arange(3) / 3
    R, TH = np.meshgrid(radii, thetas, indexing="ij")
    x1, x2 = (R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()
    h = rel_h * np.maximum(R.ravel(), r_peak)

    def spinor(y1, y2):
        rr = np.hypot(y1, y2)
        uv = p.sample(rr.ravel())
        u = uv[0].reshape(rr.shape)
        v = uv[1].reshape(rr.shape)
        return 1j * (u / rr) * (y1 + 1j * y2), v.astype(complex)

    off = _D10_OFFSETS[:, None] * h[None, :]
    p1_x1, p2_x1 = spinor(x1[None, :] + off, np.broadcast_to(x2, off.shape))
    p1_x2, p2_x2 = spinor(np.broadcast_to(x1, off.shape), x2[None, :] + off)
    d1 = lambda F: (_D10_WEIGHTS @ F) / h  # noqa: E731
    d1psi1, d1psi2 = d1(p1_x1), d1(p2_x1)
    d2psi1, d2psi2 = d1(p1_x2), d1(p2_x2)
    psi1, psi2 = spinor(x1, x2)
    Dpsi1 = -1j * (d1psi2 + 1j * d2psi2)
    Dpsi2 = -1j * (d1psi1 - 1j * d2psi1)
    a1, a2 = np.abs(psi1) ** 2, np.abs(psi2) ** 2
    G1 = (beta.beta1 * a1 + 2 * beta.beta2 * a2) * psi1
    G2 = (2 * beta.beta2 * a1 + beta.beta1 * a2) * psi2
    num = np.hypot(np.abs(Dpsi1 - G1), np.abs(Dpsi2 - G2))
    den = np.hypot(np.abs(Dpsi1), np.abs(Dpsi2)) + np.hypot(np.abs(G1), np.abs(G2))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = num / den
    rel = rel[np.isfinite(rel)]
    return float(rel.max()) if rel.size else 0.0


def verify_profile(
    p: Profile,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-14,
    identity_tol: float = 1e-6,
    fd_tol: float = 1e-4,
    pde_tol: float = 1e-4,
) -> VerificationReport:
    """Check a massless profile against the qualitative theory.

    ``rel_tol``/``abs_tol`` are the tolerances the profile was produced with
    and set the slack of the energy-monotonicity test. Violations are
    collected in the report, never raised.
    """
    if p.beta is None:
        raise ValidationError("verify_profile needs a profile with beta")
    ident = identity_residual(p)
    mono = energy_violations(p, rel_tol, abs_tol)
    pos = positivity_violations(p)
    lower, upper, decay_ok = _decay_bounds(p)
    fd1, fd2 = derivative_identity_residuals(p)
    pde = pde_residual(p)
    violations = []
    if not ident <= identity_tol:
        violations.append("IDENTITY_RESIDUAL")
    if mono:
        violations.append("ENERGY_INCREASE")
    if pos:
        violations.append("POSITIVITY")
    if not decay_ok:
        violations.append("DECAY_BOUNDS")
    if not (fd1 <= fd_tol and fd2 <= fd_tol):
        violations.append("DERIVATIVE_IDENTITY")
    if not pde <= pde_tol:
        violations.append("PDE_RESIDUAL")
    return VerificationReport(
        identity_residual=ident,
        monotonicity_violations=mono,
        positivity_violations=pos,
        decay_lower_constants=lower,
        decay_upper_constants=upper,
        decay_bounds_ok=decay_ok,
        fd_residual_ruv=fd1,
        fd_residual_r2H=fd2,
        pde_residual=pde,
        tolerances={
            "rel_tol": rel_tol,
            "abs_tol": abs_tol,
            "identity_tol": identity_tol,
            "fd_tol": fd_tol,
            "pde_tol": pde_tol,
        },
        violations=violations,
    )
