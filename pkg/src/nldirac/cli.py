"""Command-line front end.

Every run writes a profile table (or a sweep summary) and ``report.json``
into ``--out``. The report embeds the fully resolved configuration, so a
run can be reproduced from its own output. Exit status: 0 success,
1 invalid configuration, 2 numerical failure, 3 failed verification.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import NLDiracError, NumericalFailure, ValidationError
from .integrator import IntegratorConfig, Profile
from .massive import find_bound_state, massive_config
from .massless import (
    ASYMPTOTIC_R_MAX,
    ORACLE_R_MAX,
    asymptotic_config,
    asymptotic_fit,
    identity_residual,
    isotropic_closed_form,
    massless_config,
    solve_massless,
    verify_profile,
)
from .model import ISOTROPIC, BetaParams, MassiveParams, hamiltonian
from .variational import action_value

MODES = ("Massless", "Massive", "Verify", "OracleCompare", "Sweep")
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

ORACLE_TOL = 1e-6
NEHARI_TOL = 1e-3
DUAL_TOL = 1e-4
CSV_HEADER = "r,u,v,H,uv_minus_2rH"
SWEEP_COLUMNS = (
    "l",
    "c2",
    "slope_u",
    "slope_v",
    "action",
    "identity_residual",
    "kappa_fit",
    "status",
    "error_code",
)


@dataclass(frozen=True)
class RunConfig:
    mode: str = "Massless"
    beta1: float = 1.0
    beta2: float = 0.5
    lam: tuple = (math.sqrt(2.0),)
    mass: float | None = None
    omega: tuple = ()
    r_start: float | None = None
    r_max: float | None = None
    rel_tol: float | None = None
    abs_tol: float | None = None
    fit_window: tuple | None = None
    out: str = "nldirac_out"
    workers: int = 1

    @property
    def beta(self) -> BetaParams:
        return BetaParams(self.beta1, self.beta2)

    def validate(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        BetaParams(self.beta1, self.beta2)
        if self.mode == "Sweep":
            if self.omega:
                if self.mass is None:
                    raise ValidationError("an omega sweep needs --mass")
            elif not self.lam:
                raise ValidationError("sweep grid is empty")
        else:
            if len(self.lam) != 1 or len(self.omega) > 1:
                raise ValidationError(f"mode {self.mode} takes a single parameter value")
            if self.mode == "Massive":
                if self.mass is None or not self.omega:
                    raise ValidationError("Massive mode needs --mass and --omega")
                MassiveParams(self.mass, self.omega[0])
            elif self.mass is not None or self.omega:
                raise ValidationError(f"--mass/--omega only apply to Massive runs, not {self.mode}")
        if self.fit_window is not None:
            lo, hi = self.fit_window
            if not 0 < lo < hi:
                raise ValidationError(f"fit window needs 0 < lo < hi, got {self.fit_window}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        return self

    def resolved(self) -> dict:
        d = asdict(self)
        d["lambda"] = list(d.pop("lam"))
        d["omega"] = list(d["omega"])
        if d["fit_window"] is not None:
            d["fit_window"] = list(d["fit_window"])
        return d


_DEFAULTS = RunConfig()
_KEYS = {f.name: f.name for f in fields(RunConfig)}
_KEYS["lambda"] = "lam"
_KEYS.pop("lam")


def _floats(x) -> tuple:
    if x is None:
        return ()
    if isinstance(x, (list, tuple)):
        return tuple(float(v) for v in x)
    if isinstance(x, str):
        parts = [s for s in x.split(",") if s.strip()]
        return tuple(float(s) for s in parts)
    return (float(x),)


def _coerce(key: str, value):
    if value is None:
        return None
    if key in ("lam", "omega"):
        return _floats(value)
    if key == "fit_window":
        w = _floats(value)
        if len(w) != 2:
            raise ValidationError(f"fit window needs two values, got {value!r}")
        return w
    if key in ("mode", "out"):
        return str(value)
    if key == "workers":
        return int(value)
    return float(value)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nldirac", description=__doc__.splitlines()[0])
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--beta1", type=float)
    ap.add_argument("--beta2", type=float)
    ap.add_argument("--lambda", dest="lam", help="amplitude v(0); comma-separated list for sweeps")
    ap.add_argument("--mass", type=float)
    ap.add_argument("--omega", help="frequency; comma-separated list for sweeps (write --omega=-0.5,0)")
    ap.add_argument("--r-start", dest="r_start", type=float)
    ap.add_argument("--r-max", dest="r_max", type=float)
    ap.add_argument("--rel-tol", dest="rel_tol", type=float)
    ap.add_argument("--abs-tol", dest="abs_tol", type=float)
    ap.add_argument("--fit-window", dest="fit_window", help="lo,hi")
    ap.add_argument("--out")
    ap.add_argument("--workers", type=int, help="processes for sweeps")
    ap.add_argument("--config", help="JSON file with any of the options above")
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Flags override the config file, which overrides the defaults."""
    values = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a JSON object")
        for k, v in data.items():
            key = _KEYS.get(k.replace("-", "_"))
            if key is None:
                raise ValidationError(f"unknown config key {k!r}")
            values[key] = _coerce(key, v)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = _coerce(f.name, v)
    try:
        return replace(_DEFAULTS, **values).validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_report(path: Path, report: dict):
    path.write_text(json.dumps(_clean(report), indent=2) + "\n", encoding="utf-8")


def profile_table(p: Profile, beta: BetaParams) -> np.ndarray:
    H = hamiltonian((p.u, p.v), beta)
    return np.column_stack([p.grid, p.u, p.v, H, p.u * p.v - 2.0 * p.grid * H])


def write_profile(path: Path, p: Profile, beta: BetaParams):
    np.savetxt(path, profile_table(p, beta), fmt="%.17g", delimiter=",", header=CSV_HEADER, comments="", encoding="utf-8")


# ---------------------------------------------------------------------------
# modes


def _massless_cfg(c: RunConfig, lam: float, default_r_max: float) -> IntegratorConfig:
    r_max = c.r_max or default_r_max
    if r_max > ORACLE_R_MAX:
        base = asymptotic_config(lam, c.beta, r_max)
    else:
        base = massless_config(lam, c.beta, r_max)
    kw = {}
    if c.rel_tol is not None:
        kw["rel_tol"] = c.rel_tol
    if c.abs_tol is not None:
        kw["abs_tol"] = c.abs_tol
    if c.r_start is not None:
        kw["r_start"] = c.r_start
    return base.with_(**kw) if kw else base


def _massless_summary(c: RunConfig, lam: float, p: Profile, cfg: IntegratorConfig) -> dict:
    out = {
        "termination": p.termination.value,
        "n_points": len(p),
        "r_start": p.r_start,
        "r_end": p.r_end,
        "integrator": asdict(cfg),
        "identity_residual": identity_residual(p),
    }
    fit = asymptotic_fit(p, c.fit_window)
    out["asymptotic_fit"] = asdict(fit) | {"ok": fit.ok}
    out["action"] = action_value(p).as_dict()
    return out


def _run_massless(c, out_dir, report):
    lam = c.lam[0]
    cfg = _massless_cfg(c, lam, ASYMPTOTIC_R_MAX)
    p = solve_massless(lam, c.beta, cfg)
    write_profile(out_dir / "profile.csv", p, c.beta)
    report["results"] = _massless_summary(c, lam, p, cfg)
    return EXIT_OK


def _run_verify(c, out_dir, report):
    lam = c.lam[0]
    cfg = _massless_cfg(c, lam, ASYMPTOTIC_R_MAX)
    p = solve_massless(lam, c.beta, cfg)
    write_profile(out_dir / "profile.csv", p, c.beta)
    res = _massless_summary(c, lam, p, cfg)
    ver = verify_profile(p, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol)
    violations = list(ver.violations)
    act = res["action"]
    if not abs(act["nehari_residual"]) <= NEHARI_TOL * abs(act["kinetic"]):
        violations.append("NEHARI_RESIDUAL")
    if not abs(act["dual_action"] - act["action"]) <= DUAL_TOL * abs(act["action"]):
        violations.append("DUAL_GAP")
    res["verification"] = ver.as_dict()
    res["violations"] = violations
    report["results"] = res
    if violations:
        report["error"] = {"code": "VERIFICATION_FAILED", "message": ", ".join(violations)}
        return EXIT_VERIFY
    return EXIT_OK


def _run_oracle(c, out_dir, report):
    lam = c.lam[0]
    if c.beta != ISOTROPIC:
        raise ValidationError("the closed-form oracle exists only for beta = (1, 0.5)")
    cfg = _massless_cfg(c, lam, ORACLE_R_MAX)
    p = solve_massless(lam, c.beta, cfg)
    write_profile(out_dir / "profile.csv", p, c.beta)
    r = np.unique(np.concatenate([p.grid, np.geomspace(p.r_start, p.r_end, 2001)]))
    r = r[(r >= p.r_start) & (r <= p.r_end)]
    uv = p.sample(r)
    ue, ve = isotropic_closed_form(lam, r)
    err = np.maximum(np.abs(uv[0] - ue), np.abs(uv[1] - ve))
    max_err = float(err.max())
    report["results"] = {
        "termination": p.termination.value,
        "integrator": asdict(cfg),
        "n_compare": int(r.size),
        "max_abs_error": max_err,
        "r_at_max_error": float(r[np.argmax(err)]),
        "tolerance": ORACLE_TOL,
    }
    if not max_err <= ORACLE_TOL:
        report["error"] = {"code": "ORACLE_MISMATCH", "message": f"max abs error {max_err:.3e} > {ORACLE_TOL}"}
        return EXIT_VERIFY
    return EXIT_OK


def _shoot_cfg(c: RunConfig, mp: MassiveParams) -> IntegratorConfig:
    kw = {k: getattr(c, k) for k in ("rel_tol", "abs_tol", "r_start", "r_max") if getattr(c, k) is not None}
    return massive_config(mp, **kw)


def _bound_summary(b) -> dict:
    return {
        "lambda_star": b.lambda_star,
        "bracket": list(b.bracket),
        "bracket_width": b.bracket_width,
        "n_bisections": len(b.widths) - 1,
        "below": b.below.value,
        "above": b.above.value,
        "kappa_fit": b.kappa_fit,
        "kappa_theory": b.kappa_theory,
        "kappa_rel_error": b.kappa_rel_error,
        "fit_window": list(b.fit_window),
        "r_split": b.r_split,
        "r_end": b.profile.r_end,
        "ok": b.ok,
    }


def _run_massive(c, out_dir, report):
    mp = MassiveParams(c.mass, c.omega[0])
    cfg = _shoot_cfg(c, mp)
    b = find_bound_state(c.beta, mp, cfg)
    write_profile(out_dir / "profile.csv", b.profile, c.beta)
    report["results"] = {"integrator": asdict(cfg)} | _bound_summary(b)
    if not b.ok:
        report["error"] = {"code": "VERIFICATION_FAILED", "message": f"kappa error {b.kappa_rel_error:.3e}"}
        return EXIT_VERIFY
    return EXIT_OK


def _sweep_row(job):
    """One sweep entry; failures are returned, never raised."""
    c, param, value = job
    row = {param: value} | {k: None for k in SWEEP_COLUMNS}
    try:
        if param == "lambda":
            cfg = _massless_cfg(c, value, ASYMPTOTIC_R_MAX)
            p = solve_massless(value, c.beta, cfg)
            fit = asymptotic_fit(p, c.fit_window)
            row.update(
                l=fit.l,
                c2=fit.c2,
                slope_u=fit.slope_u,
                slope_v=fit.slope_v,
                action=action_value(p).action,
                identity_residual=identity_residual(p),
            )
        else:
            mp = MassiveParams(c.mass, value)
            b = find_bound_state(c.beta, mp, _shoot_cfg(c, mp))
            row.update(kappa_fit=b.kappa_fit)
        row.update(status=EXIT_OK, error_code="")
    except NLDiracError as exc:
        row.update(status=_status_for(exc), error_code=exc.code)
    return row


def _run_sweep(c, out_dir, report):
    param, grid = ("omega", c.omega) if c.omega else ("lambda", c.lam)
    grid = sorted(set(grid))
    jobs = [(c, param, v) for v in grid]
    if c.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=c.workers) as ex:
            rows = list(ex.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    cols = (param,) + SWEEP_COLUMNS
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_cell(row[k]) for k in cols))
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    report["results"] = {"parameter": param, "rows": rows}
    return max(row["status"] for row in rows)


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _status_for(exc: Exception) -> int:
    if isinstance(exc, ValidationError):
        return EXIT_INVALID
    if isinstance(exc, NumericalFailure):
        return EXIT_NUMERICAL
    if isinstance(exc, NLDiracError):
        return EXIT_NUMERICAL
    raise exc


_RUNNERS = {
    "Massless": _run_massless,
    "Massive": _run_massive,
    "Verify": _run_verify,
    "OracleCompare": _run_oracle,
    "Sweep": _run_sweep,
}


def run(c: RunConfig) -> int:
    """Execute a validated configuration; returns the exit status."""
    out_dir = Path(c.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"config": c.resolved(), "status": None, "error": None}
    try:
        status = _RUNNERS[c.mode](c, out_dir, report)
    except NLDiracError as exc:
        status = _status_for(exc)
        report["error"] = {"code": exc.code, "message": str(exc)}
    report["status"] = status
    write_report(out_dir / "report.json", report)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        c = resolve_config(args)
    except ValidationError as exc:
        out = Path(args.out or _DEFAULTS.out)
        out.mkdir(parents=True, exist_ok=True)
        write_report(out / "report.json", {"config": None, "status": EXIT_INVALID, "error": {"code": exc.code, "message": str(exc)}})
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INVALID
    status = run(c)
    if status != EXIT_OK:
        print(f"nldirac: finished with status {status}; see {Path(c.out) / 'report.json'}", file=sys.stderr)
    return status
