"""Massive bound states by shooting on the initial amplitude.

The massive radial system

    u' + u/r = (2 beta2 u^2 + beta1 v^2) v - (m - omega) v,
    v'       = -(beta1 u^2 + 2 beta2 v^2) u - (m + omega) u,

started from ``u(0) = 0, v(0) = lam`` generically leaves any neighbourhood
of the origin through either ``u = 0`` or ``v = 0``. Which of the two
happens first changes across a critical amplitude ``lam*``; the trajectory
at ``lam*`` decays like ``exp(-kappa r)`` with ``kappa = sqrt(m^2 - omega^2)``.

Which side of ``lam*`` gives which crossing is not assumed. For the
parameters tested here small amplitudes cross ``u = 0`` first and large
ones cross ``v = 0`` first, and the outcome at each bracket end is stored
on the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    BracketInvalid,
    DegenerateProfile,
    NoConvergence,
    TrivialLambda,
    ValidationError,
    WindowTooShort,
)
from .integrator import (
    EventKind,
    IntegratorConfig,
    Profile,
    default_r_start,
    integrate,
    massive_rhs,
    massless_rhs,
    series_start,
)
from .model import BetaParams, MassiveParams

__all__ = [
    "ShootKind",
    "ShootOutcome",
    "BoundState",
    "massive_config",
    "classify",
    "shoot_profile",
    "scan_bracket",
    "find_bound_state",
    "decay_fit",
    "CLASSIFY_E_FOLDS",
]

CLASSIFY_E_FOLDS = 40.0
MAX_EXTENSIONS = 3
STABILITY_FACTOR = 100.0
WIDTH_TOL = 1e-12
KAPPA_TOL = 0.05
SPLIT_FRACTION = 1e-2
CORE_FRACTION = 0.1
TRUNCATION_FLOOR = 1e-10
FIT_POINTS = 200


class ShootKind(str, Enum):
    V_CROSSED_ZERO = "VCrossedZero"
    U_CROSSED_ZERO = "UCrossedZero"
    UNDETERMINED = "Undetermined"


_FROM_EVENT = {
    EventKind.U_CROSSES_ZERO.value: ShootKind.U_CROSSED_ZERO,
    EventKind.V_CROSSES_ZERO.value: ShootKind.V_CROSSED_ZERO,
}


@dataclass(frozen=True)
class ShootOutcome:
    kind: ShootKind
    r_event: float | None = None

    @property
    def determined(self) -> bool:
        return self.kind is not ShootKind.UNDETERMINED


@dataclass(frozen=True, eq=False)
class BoundState:
    """Decaying solution of the massive system found by bisection.

    ``below`` and ``above`` are the outcomes at the lower and upper bracket
    ends. ``fit_window`` is where ``kappa_fit`` was measured and ``r_split``
    the radius beyond which the two bracket ends visibly disagree.
    """

    lambda_star: float
    profile: Profile
    kappa_fit: float
    kappa_theory: float
    bracket_width: float
    bracket: tuple[float, float]
    below: ShootKind
    above: ShootKind
    fit_window: tuple[float, float]
    r_split: float
    widths: tuple = field(default=(), repr=False)
    kappa_tol: float = KAPPA_TOL

    @property
    def kappa_rel_error(self) -> float:
        return abs(self.kappa_fit - self.kappa_theory) / self.kappa_theory

    @property
    def ok(self) -> bool:
        return self.kappa_rel_error <= self.kappa_tol and self.bracket_width <= WIDTH_TOL * abs(self.lambda_star)


def massive_config(mp: MassiveParams, rel_tol: float = 1e-10, abs_tol: float = 1e-14, **kw) -> IntegratorConfig:
    """Integrator settings for shooting: ``r_max`` spans 40 decay lengths."""
    kw.setdefault("r_max", CLASSIFY_E_FOLDS / mp.kappa)
    return IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol, **kw)


def _shoot(lam, beta, mp, cfg, events=True):
    r0 = min(cfg.r_start, default_r_start(lam, beta, mp, tol=cfg.rel_tol))
    cfg = cfg.with_(r_start=r0)
    start = series_start(lam, r0, beta, mp, tol=cfg.rel_tol)
    rhs = massless_rhs(beta) if mp is None else massive_rhs(beta, mp)
    kinds = (EventKind.U_CROSSES_ZERO, EventKind.V_CROSSES_ZERO) if events else ()
    return integrate(rhs, start, cfg, kinds, terminal=True, lam=lam, beta=beta, massive=mp)


def shoot_profile(lam: float, beta: BetaParams, mp: MassiveParams | None, cfg: IntegratorConfig | None = None) -> Profile:
    """Trajectory from ``v(0) = lam`` up to ``r_max`` or blow-up, without events."""
    if lam == 0:
        raise TrivialLambda("lambda = 0 gives the trivial solution")
    if cfg is None:
        cfg = massive_config(mp) if mp is not None else IntegratorConfig()
    return _shoot(lam, beta, mp, cfg, events=False)[0]


def classify(lam: float, beta: BetaParams, mp: MassiveParams | None = None, cfg: IntegratorConfig | None = None) -> ShootOutcome:
    """First sign change of ``u`` or ``v`` along the trajectory started at ``lam``.

    Without ``mp`` the massless field is used, which is the ``m = omega = 0``
    limit of the massive one. In the massive case a run reaching ``r_max``
    without an event is repeated with ``r_max`` doubled, up to three times.
    """
    if lam == 0:
        raise TrivialLambda("lambda = 0 gives the trivial solution")
    if cfg is None:
        cfg = massive_config(mp) if mp is not None else IntegratorConfig()
    extensions = MAX_EXTENSIONS if mp is not None else 0
    for _ in range(extensions + 1):
        _, events = _shoot(lam, beta, mp, cfg)
        if events:
            return ShootOutcome(_FROM_EVENT[events[0].kind], events[0].r_event)
        cfg = cfg.with_(r_max=2.0 * cfg.r_max)
    return ShootOutcome(ShootKind.UNDETERMINED)


def _classify_stable(lam, beta, mp, cfg):
    a = classify(lam, beta, mp, cfg)
    b = classify(lam, beta, mp, cfg.refined(STABILITY_FACTOR))
    return a if a.kind is b.kind else ShootOutcome(ShootKind.UNDETERMINED)


def scan_bracket(
    beta: BetaParams, mp: MassiveParams, cfg: IntegratorConfig | None = None, lam0: float = 0.125, n_max: int = 12
) -> tuple[float, float]:
    """First pair ``lam0 2^k < lam0 2^(k+1)`` of determined, differing outcomes.

    Undetermined amplitudes are skipped, so the pair may span more than one
    doubling.
    """
    if not lam0 > 0:
        raise ValidationError("lam0 must be positive")
    cfg = cfg or massive_config(mp)
    prev = None
    for k in range(n_max + 1):
        lam = lam0 * 2.0**k
        out = classify(lam, beta, mp, cfg)
        if not out.determined:
            continue
        if prev is not None and out.kind is not prev[1]:
            return (prev[0], lam)
        prev = (lam, out.kind)
    raise BracketInvalid(f"no sign change of the shooting outcome on [{lam0}, {lam0 * 2.0**n_max}]")


def _norm(uv):
    return np.hypot(uv[0], uv[1])


def _truncate(p: Profile, r_end: float) -> Profile:
    keep = p.grid < r_end
    grid = np.append(p.grid[keep], r_end)
    uv = p.sample(r_end)[:, 0]
    u = np.append(p.u[keep], uv[0])
    v = np.append(p.v[keep], uv[1])
    dense = p.dense.truncated(r_end) if hasattr(p.dense, "truncated") else p.dense
    return Profile(grid, u, v, p.lam, p.beta, p.massive, p.termination, dense)


def _resample_uniform(p: Profile, window, n=FIT_POINTS) -> Profile:
    grid = np.linspace(window[0], window[1], n)
    uv = p.sample(grid)
    return Profile(grid, uv[0], uv[1], p.lam, p.beta, p.massive, p.termination, p.dense)


def find_bound_state(
    beta: BetaParams,
    mp: MassiveParams,
    cfg: IntegratorConfig | None = None,
    bracket: tuple[float, float] | None = None,
    width_tol: float = WIDTH_TOL,
) -> BoundState:
    """Bisect on ``lam`` until the bracket is narrower than ``width_tol * lam``.

    Without ``bracket`` one is found by :func:`scan_bracket`. Both ends must
    classify differently, and identically under 100x tighter tolerances.
    """
    cfg = cfg or massive_config(mp)
    lo, hi = bracket if bracket is not None else scan_bracket(beta, mp, cfg)
    lo, hi = float(min(lo, hi)), float(max(lo, hi))
    if lo == 0:
        raise TrivialLambda("bracket end at lambda = 0")
    if lo < 0 < hi:
        raise BracketInvalid("bracket straddles lambda = 0")
    o_lo = _classify_stable(lo, beta, mp, cfg)
    o_hi = _classify_stable(hi, beta, mp, cfg)
    if not (o_lo.determined and o_hi.determined):
        raise BracketInvalid(f"bracket end undetermined: {o_lo.kind.value} at {lo}, {o_hi.kind.value} at {hi}")
    if o_lo.kind is o_hi.kind:
        raise BracketInvalid(f"both bracket ends give {o_lo.kind.value}")

    widths = [hi - lo]
    while hi - lo > width_tol * abs(lo + 0.5 * (hi - lo)):
        mid = lo + 0.5 * (hi - lo)
        if mid <= lo or mid >= hi:
            break
        out = classify(mid, beta, mp, cfg)
        if out.kind is o_lo.kind:
            lo = mid
        elif out.kind is o_hi.kind:
            hi = mid
        else:
            raise NoConvergence(f"undetermined outcome at lambda={mid!r}", bracket=(lo, hi))
        widths.append(hi - lo)

    lam_star = lo + 0.5 * (hi - lo)
    p_mid, _ = _shoot(lam_star, beta, mp, cfg, events=False)
    p_lo, _ = _shoot(lo, beta, mp, cfg, events=False)
    p_hi, _ = _shoot(hi, beta, mp, cfg, events=False)

    r_common = min(p_mid.r_end, p_lo.r_end, p_hi.r_end)
    rr = np.linspace(p_mid.r_start, r_common, 8001)
    n_mid = _norm(p_mid.sample(rr))
    spread = _norm(p_lo.sample(rr) - p_hi.sample(rr))
    split = np.nonzero(spread > SPLIT_FRACTION * n_mid)[0]
    r_split = float(rr[split[0]]) if split.size else float(r_common)

    inside = rr <= r_split
    below = np.nonzero(inside & (n_mid < TRUNCATION_FLOOR))[0]
    r_trunc = float(rr[below[0]]) if below.size else r_split
    profile = _truncate(p_mid, r_trunc)

    core = np.nonzero(inside & (n_mid > CORE_FRACTION * abs(lam_star)))[0]
    r_c = float(rr[core[-1]]) if core.size else p_mid.r_start
    kappa = mp.kappa
    window = (r_c + 5.0 / kappa, min(r_c + 25.0 / kappa, r_trunc))
    if not window[1] > window[0]:
        raise WindowTooShort(f"decay window {window} is empty; bracket ends separate too early")
    kappa_fit = decay_fit(_resample_uniform(profile, window), window, prefactor_power=0.5)

    return BoundState(
        lambda_star=lam_star,
        profile=profile,
        kappa_fit=kappa_fit,
        kappa_theory=kappa,
        bracket_width=hi - lo,
        bracket=(lo, hi),
        below=o_lo.kind,
        above=o_hi.kind,
        fit_window=window,
        r_split=r_split,
        widths=tuple(widths),
    )


def decay_fit(p: Profile, window: tuple[float, float], prefactor_power: float = 0.0) -> float:
    """Least-squares decay rate of ``r^a |(u, v)|`` over the samples in ``window``.

    With ``a = 0`` this is the plain slope of ``-log|(u, v)|``. Tails of the
    linearized massive system behave like ``r^(-1/2) exp(-kappa r)``, and
    ``a = 1/2`` removes the algebraic factor that otherwise biases the
    slope by roughly ``1 / (2 kappa r)``.
    """
    r_lo, r_hi = window
    sel = (p.grid >= r_lo) & (p.grid <= r_hi)
    if np.count_nonzero(sel) < 10:
        raise WindowTooShort(f"only {np.count_nonzero(sel)} samples in window [{r_lo}, {r_hi}]")
    r = p.grid[sel]
    amp = np.hypot(p.u[sel], p.v[sel])
    if np.any(amp == 0) or not np.all(np.isfinite(amp)):
        raise DegenerateProfile("zero or non-finite amplitude inside the fit window")
    y = np.log(amp) + prefactor_power * np.log(r)
    slope = np.polyfit(r, y, 1)[0]
    return float(-slope)
