"""Adaptive Dormand-Prince 5(4) integration of the radial systems.

The low-level driver :func:`solve` works on any ``f(r, y) -> ndarray``. The
radial wrappers (:func:`integrate`, :func:`shifted_integrate`) package the
result into a :class:`Profile` carrying the continuous extension, so
downstream code can resample without re-integrating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import R0TooLarge, ValidationError
from .model import BetaParams, MassiveParams, TrajectoryState, hamiltonian

__all__ = [
    "IntegratorConfig",
    "Termination",
    "EventKind",
    "Event",
    "Profile",
    "DenseOutput",
    "Trajectory",
    "solve",
    "integrate",
    "series_start",
    "series_coefficients",
    "default_r_start",
    "shifted_integrate",
    "massless_rhs",
    "limit_rhs",
    "massive_rhs",
    "shifted_rhs",
    "log_resample",
]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
# continuous extension, y(r + th) = y + h K^T P [th, th^2, th^3, th^4]
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MAX_GROWTH = 5.0
MIN_SHRINK = 0.1
# PI exponents for a 4th-order error estimate (Hairer & Wanner's DOPRI5 choice)
PI_ALPHA = 0.17
PI_BETA = 0.04
EVENT_REL_WIDTH = 1e-10


class Termination(str, Enum):
    REACHED_R_MAX = "ReachedRMax"
    BLOW_UP = "BlowUp"
    STEP_UNDERFLOW = "StepUnderflow"
    TERMINAL_EVENT = "TerminalEvent"
    MAX_STEPS = "MaxSteps"


class EventKind(str, Enum):
    U_CROSSES_ZERO = "UCrossesZero"
    V_CROSSES_ZERO = "VCrossesZero"
    NORM_EXCEEDS_THRESHOLD = "NormExceedsThreshold"


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    r_start: float = 1e-4
    r_max: float = 50.0
    max_steps: int = 500_000
    blowup_threshold: float = 1e6

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValidationError("tolerances must be positive")
        if not 0 < self.r_start < self.r_max:
            raise ValidationError(f"need 0 < r_start < r_max, got {self.r_start}, {self.r_max}")
        if self.max_steps < 1:
            raise ValidationError("max_steps must be >= 1")
        if not self.blowup_threshold > 0:
            raise ValidationError("blowup_threshold must be positive")

    def refined(self, factor: float) -> "IntegratorConfig":
        """Same run with both tolerances divided by ``factor``."""
        return IntegratorConfig(
            rel_tol=self.rel_tol / factor,
            abs_tol=self.abs_tol / factor,
            r_start=self.r_start,
            r_max=self.r_max,
            max_steps=self.max_steps,
            blowup_threshold=self.blowup_threshold,
        )

    def with_(self, **kw) -> "IntegratorConfig":
        d = dict(self.__dict__)
        d.update(kw)
        return IntegratorConfig(**d)


@dataclass(frozen=True)
class Event:
    kind: str
    r_event: float
    state: TrajectoryState
    bracket: tuple[float, float]


class DenseOutput:
    """Piecewise quartic continuous extension over the accepted steps."""

    def __init__(self, r0s, hs, y0s, Qs, r_end=None):
        self.r0s = np.asarray(r0s, dtype=float)
        self.hs = np.asarray(hs, dtype=float)
        self.y0s = np.asarray(y0s, dtype=float)
        self.Qs = np.asarray(Qs, dtype=float)
        self.r_lo = float(self.r0s[0])
        self.r_hi = float(self.r0s[-1] + self.hs[-1]) if r_end is None else float(r_end)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        rr = np.atleast_1d(r)
        idx = np.searchsorted(self.r0s, rr, side="right") - 1
        idx = np.clip(idx, 0, len(self.r0s) - 1)
        th = (rr - self.r0s[idx]) / self.hs[idx]
        powers = np.stack([th, th**2, th**3, th**4], axis=-1)  # (m, 4)
        y = self.y0s[idx] + self.hs[idx, None] * np.einsum("mnk,mk->mn", self.Qs[idx], powers)
        y = y.T  # (n, m)
        return y[:, 0] if scalar else y

    def truncated(self, r_end: float) -> "DenseOutput":
        return DenseOutput(self.r0s, self.hs, self.y0s, self.Qs, r_end=r_end)


@dataclass(frozen=True)
class Trajectory:
    r: np.ndarray
    y: np.ndarray  # shape (n, len(r))
    termination: Termination
    events: list
    dense: DenseOutput | None
    n_steps: int
    n_rejected: int


def _rms(x):
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(f, r0, y0, f0, direction_span, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y0 + h0 * f0
    f1 = f(r0 + h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_span)


def _locate(g, dense, r_lo, r_hi, s_lo):
    """Bisect a sign change of ``g(r, y)`` on the dense interpolant."""
    for _ in range(200):
        if r_hi - r_lo <= EVENT_REL_WIDTH * max(abs(r_hi), 1e-300):
            break
        mid = r_lo + 0.5 * (r_hi - r_lo)
        if mid <= r_lo or mid >= r_hi:
            break
        gm = g(mid, dense(mid))
        if gm == 0.0:
            return mid, mid
        if math.copysign(1.0, gm) == s_lo:
            r_lo = mid
        else:
            r_hi = mid
    return r_lo, r_hi


def solve(
    f: Callable,
    r0: float,
    y0,
    r_end: float,
    rel_tol: float,
    abs_tol: float,
    max_steps: int = 500_000,
    blowup_threshold: float = math.inf,
    event_fns: Sequence[tuple[str, Callable]] = (),
    terminal: bool = True,
) -> Trajectory:
    """Integrate ``y' = f(r, y)`` on ``[r0, r_end]``.

    Local error is controlled component-wise by ``abs_tol + rel_tol |y|``
    (max norm). ``event_fns`` are ``(label, g)`` pairs; a sign change of
    ``g(r, y)`` between two accepted steps is refined by bisection on the
    continuous extension. A norm above ``blowup_threshold`` is recorded as a
    ``NormExceedsThreshold`` event and ends the run.
    """
    y = np.array(y0, dtype=float).reshape(-1)
    r = float(r0)
    span = float(r_end) - r
    if span <= 0:
        raise ValidationError("r_end must exceed r0")

    rs = [r]
    ys = [y.copy()]
    seg_r0, seg_h, seg_y0, seg_Q = [], [], [], []
    events: list = []
    last_sign = {}
    for label, g in event_fns:
        gv = g(r, y)
        if gv != 0.0:
            last_sign[label] = math.copysign(1.0, gv)

    k1 = f(r, y)
    h = _initial_step(f, r, y, k1, span, rel_tol, abs_tol)
    err_prev = 1.0
    n_steps = n_rej = 0
    termination = Termination.REACHED_R_MAX
    just_rejected = False
    K = np.empty((7, y.size))

    while True:
        if r >= r_end:
            break
        if n_steps >= max_steps:
            termination = Termination.MAX_STEPS
            break
        min_h = 10.0 * np.spacing(max(abs(r), 1e-300))
        if h < min_h:
            termination = Termination.STEP_UNDERFLOW
            break
        last = r + h >= r_end
        if last:
            h = r_end - r
        k2 = f(r + _C[1] * h, y + h * (_A21 * k1))
        k3 = f(r + _C[2] * h, y + h * (_A31 * k1 + _A32 * k2))
        k4 = f(r + _C[3] * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
        k5 = f(r + _C[4] * h, y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
        k6 = f(r + h, y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
        y_new = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        r_new = r_end if last else r + h
        k7 = f(r_new, y_new)
        err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid="ignore", over="ignore"):
            err_norm = float(np.max(np.abs(err) / scale))
        if not math.isfinite(err_norm):
            err_norm = math.inf

        if err_norm > 1.0:
            n_rej += 1
            fac = MIN_SHRINK if err_norm == math.inf else max(MIN_SHRINK, SAFETY * err_norm ** (-0.2))
            h *= fac
            just_rejected = True
            continue

        # accepted
        n_steps += 1
        K[0], K[1], K[2], K[3], K[4], K[5], K[6] = k1, k2, k3, k4, k5, k6, k7
        Q = K.T @ _P
        seg_r0.append(r)
        seg_h.append(h)
        seg_y0.append(y.copy())
        seg_Q.append(Q)
        r_prev, y_prev = r, y
        r, y, k1 = r_new, y_new, k7

        stop_r = None
        stop_event = None
        dense_step = None

        def step_dense(x, _r0=r_prev, _h=h, _y0=y_prev, _Q=Q):
            th = (x - _r0) / _h
            return _y0 + _h * (_Q @ np.array([th, th * th, th**3, th**4]))

        for label, g in event_fns:
            gv = g(r, y)
            if gv == 0.0:
                continue
            s_new = math.copysign(1.0, gv)
            s_old = last_sign.get(label)
            last_sign[label] = s_new
            if s_old is not None and s_old != s_new:
                lo, hi = _locate(g, step_dense, r_prev, r, s_old)
                r_ev = lo + 0.5 * (hi - lo)
                if stop_r is None or r_ev < stop_r:
                    stop_r = r_ev
                    stop_event = (label, r_ev, (lo, hi))
        ynorm = float(np.linalg.norm(y))
        if not ynorm <= blowup_threshold:

            def g_norm(x, yy):
                return blowup_threshold - float(np.linalg.norm(yy))

            lo, hi = _locate(g_norm, step_dense, r_prev, r, 1.0)
            r_ev = lo + 0.5 * (hi - lo)
            if stop_r is None or r_ev <= stop_r:
                stop_r = r_ev
                stop_event = (EventKind.NORM_EXCEEDS_THRESHOLD.value, r_ev, (lo, hi))
        if stop_event is not None:
            label, r_ev, br = stop_event
            y_ev = step_dense(r_ev)
            events.append((label, r_ev, y_ev, br))
            blow = label == EventKind.NORM_EXCEEDS_THRESHOLD.value
            if terminal or blow:
                rs.append(r_ev)
                ys.append(y_ev)
                termination = Termination.BLOW_UP if blow else Termination.TERMINAL_EVENT
                dense_step = r_ev
                break
        rs.append(r)
        ys.append(y.copy())
        if last:
            break

        # PI step-size controller
        if err_norm == 0.0:
            fac = MAX_GROWTH
        else:
            fac = SAFETY * err_norm ** (-PI_ALPHA) * err_prev**PI_BETA
            fac = min(MAX_GROWTH, max(MIN_SHRINK, fac))
        if just_rejected:
            fac = min(fac, 1.0)
        just_rejected = False
        err_prev = max(err_norm, 1e-4)
        h *= fac

    dense = None
    if seg_r0:
        dense = DenseOutput(seg_r0, seg_h, seg_y0, seg_Q, r_end=dense_step if dense_step is not None else rs[-1])
    return Trajectory(
        r=np.array(rs),
        y=np.array(ys).T,
        termination=termination,
        events=events,
        dense=dense,
        n_steps=n_steps,
        n_rejected=n_rej,
    )


# ---------------------------------------------------------------------------
# radial systems


def massless_rhs(beta: BetaParams):
    b1, b2 = beta.beta1, beta.beta2

    def f(r, y):
        u, v = y[0], y[1]
        u2, v2 = u * u, v * v
        return np.array([v * (2.0 * b2 * u2 + b1 * v2) - u / r, -u * (b1 * u2 + 2.0 * b2 * v2)])

    return f


def limit_rhs(beta: BetaParams):
    b1, b2 = beta.beta1, beta.beta2

    def f(r, y):
        u, v = y[0], y[1]
        u2, v2 = u * u, v * v
        return np.array([v * (2.0 * b2 * u2 + b1 * v2), -u * (b1 * u2 + 2.0 * b2 * v2)])

    return f


def massive_rhs(beta: BetaParams, mp: MassiveParams):
    b1, b2 = beta.beta1, beta.beta2
    a, b = mp.m - mp.omega, mp.m + mp.omega

    def f(r, y):
        u, v = y[0], y[1]
        u2, v2 = u * u, v * v
        return np.array([(2.0 * b2 * u2 + b1 * v2) * v - a * v - u / r, -(b1 * u2 + 2.0 * b2 * v2) * u - b * u])

    return f


def shifted_rhs(beta: BetaParams, rho: float):
    b1, b2 = beta.beta1, beta.beta2

    def f(r, y):
        u, v = y[0], y[1]
        u2, v2 = u * u, v * v
        return np.array([(2.0 * b2 * u2 + b1 * v2) * v - u / (r + rho), -(b1 * u2 + 2.0 * b2 * v2) * u])

    return f


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True, eq=False)
class Profile:
    """Radial solution samples plus run metadata.

    ``dense`` maps radii to a ``(2, m)`` array of ``(u, v)``; when absent a
    cubic spline through the samples is used.
    """

    grid: np.ndarray
    u: np.ndarray
    v: np.ndarray
    lam: float | None
    beta: BetaParams | None
    massive: MassiveParams | None = None
    termination: Termination = Termination.REACHED_R_MAX
    dense: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if g.ndim != 1 or g.size < 2 or u.shape != g.shape or v.shape != g.shape:
            raise ValidationError("profile arrays must be 1-D, aligned, length >= 2")
        if np.any(np.diff(g) <= 0):
            raise ValidationError("profile grid must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def r_start(self) -> float:
        return float(self.grid[0])

    @property
    def r_end(self) -> float:
        return float(self.grid[-1])

    @property
    def H(self) -> np.ndarray:
        if self.beta is None:
            raise ValidationError("profile has no beta attached")
        return hamiltonian((self.u, self.v), self.beta)

    def __len__(self):
        return self.grid.size

    def sample(self, r) -> np.ndarray:
        """``(u, v)`` at arbitrary radii inside the grid, shape ``(2, m)``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.dense is not None:
            return np.asarray(self.dense(r)).reshape(2, -1)
        spline = CubicSpline(self.grid, np.vstack([self.u, self.v]), axis=1)
        return spline(r)


def log_resample(p: Profile, points_per_decade: int = 64, r_lo=None, r_hi=None) -> Profile:
    """Profile resampled on a log-uniform grid (endpoints included)."""
    lo = p.r_start if r_lo is None else max(r_lo, p.r_start)
    hi = p.r_end if r_hi is None else min(r_hi, p.r_end)
    decades = math.log10(hi / lo)
    n = max(2, int(math.ceil(decades * points_per_decade)) + 1)
    grid = np.geomspace(lo, hi, n)
    grid[0], grid[-1] = lo, hi
    uv = p.sample(grid)
    return Profile(grid, uv[0], uv[1], p.lam, p.beta, p.massive, p.termination, p.dense)


def _event_fns(events):
    table = {
        EventKind.U_CROSSES_ZERO: lambda r, y: y[0],
        EventKind.V_CROSSES_ZERO: lambda r, y: y[1],
    }
    out = []
    for ev in events:
        ev = EventKind(ev)
        if ev is EventKind.NORM_EXCEEDS_THRESHOLD:
            continue  # always armed through blowup_threshold
        out.append((ev.value, table[ev]))
    return out


def integrate(
    field_fn: Callable,
    start: TrajectoryState,
    cfg: IntegratorConfig,
    events: Sequence = (),
    *,
    terminal: bool = True,
    lam: float | None = None,
    beta: BetaParams | None = None,
    massive: MassiveParams | None = None,
) -> tuple[Profile, list[Event]]:
    """Integrate a radial field from ``start`` to ``cfg.r_max``."""
    if not math.isclose(start.r, cfg.r_start, rel_tol=1e-14, abs_tol=0.0):
        raise ValidationError(f"start radius {start.r} differs from cfg.r_start {cfg.r_start}")
    traj = solve(
        field_fn,
        start.r,
        (start.u, start.v),
        cfg.r_max,
        cfg.rel_tol,
        cfg.abs_tol,
        max_steps=cfg.max_steps,
        blowup_threshold=cfg.blowup_threshold,
        event_fns=_event_fns(events),
        terminal=terminal,
    )
    return _to_profile(traj, lam, beta, massive), _to_events(traj)


def _to_events(traj: Trajectory) -> list[Event]:
    return [
        Event(kind=label, r_event=float(r), state=TrajectoryState(float(r), float(y[0]), float(y[1])), bracket=br)
        for label, r, y, br in traj.events
    ]


def _to_profile(traj: Trajectory, lam, beta, massive) -> Profile:
    r, y = traj.r, traj.y
    keep = np.concatenate([[True], np.diff(r) > 0])
    r, y = r[keep], y[:, keep]
    if r.size < 2:
        raise ValidationError("integration produced fewer than two samples")
    return Profile(r, y[0], y[1], lam, beta, massive, traj.termination, traj.dense)


# ---------------------------------------------------------------------------
# start at the singular point


def default_r_start(lam: float, beta: BetaParams | None = None, mp: MassiveParams | None = None, tol: float = 1e-10) -> float:
    """``1e-4 min(1, 1/|lam|)``, divided by 10 until the series start is accurate to ``tol``."""
    r0 = 1e-4 * min(1.0, 1.0 / abs(lam)) if lam != 0 else 1e-4
    if beta is None or lam == 0:
        return r0
    a1, c2, a3, c4 = series_coefficients(lam, beta, mp)
    for _ in range(8):
        if max(abs(a3) * r0**3, abs(c4) * r0**4) <= tol * abs(lam):
            break
        r0 /= 10.0
    return r0


def series_coefficients(lam: float, beta: BetaParams, mp: MassiveParams | None = None):
    """Taylor coefficients ``u = a1 r + a3 r^3``, ``v = lam + b2 r^2 + b4 r^4``.

    Obtained by matching powers of ``r`` in the radial system with
    ``u(0) = 0``, ``v(0) = lam``.
    """
    b1, b2 = beta.beta1, beta.beta2
    A = 0.0 if mp is None else mp.m - mp.omega
    B = 0.0 if mp is None else mp.m + mp.omega
    a1 = 0.5 * (b1 * lam**3 - A * lam)
    c2 = -0.5 * (2.0 * b2 * lam**2 + B) * a1
    a3 = 0.25 * (2.0 * b2 * a1 * a1 * lam + 3.0 * b1 * lam * lam * c2 - A * c2)
    c4 = 0.25 * (-b1 * a1**3 - 4.0 * b2 * lam * c2 * a1 - (2.0 * b2 * lam * lam + B) * a3)
    return a1, c2, a3, c4


def series_start(
    lam: float,
    r0: float,
    beta: BetaParams,
    mp: MassiveParams | None = None,
    tol: float = 1e-10,
) -> TrajectoryState:
    """Truncated Taylor start at ``r0`` for ``u(0) = 0, v(0) = lam``.

    Raises :class:`R0TooLarge` when the first neglected terms exceed
    ``tol * |lam|``.
    """
    if not r0 > 0:
        raise ValidationError(f"r0 must be positive, got {r0}")
    if lam == 0:
        return TrajectoryState(r0, 0.0, 0.0)
    a1, c2, a3, c4 = series_coefficients(lam, beta, mp)
    trunc = max(abs(a3) * r0**3, abs(c4) * r0**4)
    if trunc > tol * abs(lam):
        raise R0TooLarge(f"series truncation {trunc:.3e} exceeds {tol:.1e}*|lambda| at r0={r0}")
    return TrajectoryState(r0, a1 * r0, lam + c2 * r0 * r0)


# ---------------------------------------------------------------------------


def shifted_integrate(
    rho: float,
    start,
    beta: BetaParams,
    T: float,
    rel_tol: float = 1e-12,
    abs_tol: float = 1e-15,
) -> Profile:
    """Flow of the system with ``u/(r + rho)`` damping on ``[0, T]``."""
    if not rho > 0:
        raise ValidationError(f"rho must be positive, got {rho}")
    u0, v0 = float(start[0]), float(start[1])
    if u0 == 0.0 and v0 == 0.0:
        grid = np.array([0.0, float(T)])
        zeros = np.zeros(2)
        return Profile(grid, zeros, zeros.copy(), None, beta, None, Termination.REACHED_R_MAX, lambda r: np.zeros((2, np.size(r))))
    traj = solve(shifted_rhs(beta, rho), 0.0, (u0, v0), float(T), rel_tol, abs_tol)
    return _to_profile(traj, None, beta, None)
