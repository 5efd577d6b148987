"""Experiment orchestration: config loading, single runs, sweeps and rate fits.

Configs are YAML mappings whose keys are exactly the fields of
:class:`ExperimentConfig`, for example::

    scenario: coaxial_pair
    centers: [[-0.5, 0.0], [0.5, 0.0]]
    intensities: [1.0, 1.0]
    eps_list: [1.0e-1, 3.0e-2, 1.0e-2]
    alpha: 3.0
    horizon: 0.5
    dt: auto            # or a number
    particles_per_blob: 40
    delta: auto         # or a number
    output_dir: runs/pair
    workers: 1
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .diagnostics import (BoundReport, bound_report, blob_moments,
                          diagnostic_mollifier, mass_tail, pv_deviation, sandwich,
                          solve_epsilon0)
from .errors import ConfigurationError, FitError, NumericalError
from .point_vortex import (PointVortexState, min_separation, pv_integrate,
                           pv_invariants, pv_step, step_schedule)
from .ring_sim import (SimParams, advance, init_blobs, particle_velocities,
                       write_checkpoint)

__all__ = [
    "OUTPUT_DIR_ENV", "ExperimentConfig", "CaseResult", "ConvergenceReport",
    "load_config", "run_case", "sweep_and_fit", "solve_epsilon0", "pv_run",
    "estimate_case_seconds",
]

OUTPUT_DIR_ENV = "SMOKERING_OUTPUT_DIR"

DIAG_COLUMNS = ("t", "i", "B1", "B2", "I", "Rt", "m_half_Rt", "mu", "delta",
                "support_bound", "delta_bound", "inertia_bound")

# Log-space residual above which a rate fit is reported as pre-asymptotic.
PRE_ASYMPTOTIC_RESIDUAL = 0.2


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    centers: tuple
    intensities: tuple
    eps_list: tuple
    alpha: float = 3.0
    horizon: float = 1.0
    dt: float | None = None
    particles_per_blob: int = 100
    delta: float | None = None
    output_dir: str = "."
    workers: int = 1
    exploratory: bool = False
    gamma: float = 2.0
    drift: bool = False
    diag_every: int = 1
    pv_dt: float = 1e-3

    def __post_init__(self):
        z = np.asarray(self.centers, dtype=float)
        a = np.asarray(self.intensities, dtype=float)
        if z.ndim != 2 or z.shape[1] != 2 or len(z) == 0:
            raise ConfigurationError("centers must be a nonempty list of [x1, x2] pairs")
        if a.shape != (len(z),):
            raise ConfigurationError("need one intensity per center")
        if np.any(a == 0.0) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(z))):
            raise ConfigurationError("intensities must be finite and nonzero")
        if len(z) > 1 and not min_separation(z)[0] > 0.0:
            raise ConfigurationError("centers must be pairwise distinct")
        eps = tuple(float(e) for e in self.eps_list)
        if not eps or any(not 0.0 < e < 1.0 for e in eps):
            raise ConfigurationError("every eps must lie in (0, 1)")
        if len(set(eps)) != len(eps):
            raise ConfigurationError("eps_list has duplicates")
        if not (self.alpha > 2.0 or (self.exploratory and self.alpha > 0.0)):
            raise ConfigurationError("alpha <= 2 is only allowed with exploratory: true")
        for name in ("horizon", "pv_dt"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("particles_per_blob", "workers", "diag_every"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        object.__setattr__(self, "centers", tuple(map(tuple, z.tolist())))
        object.__setattr__(self, "intensities", tuple(a.tolist()))
        object.__setattr__(self, "eps_list", tuple(sorted(eps, reverse=True)))

    @property
    def k(self) -> float:
        return 0.5 * (self.alpha - 2.0)

    def sim_params(self, eps: float, workers: int | None = None) -> SimParams:
        return SimParams(
            eps=eps, alpha=self.alpha, gamma=self.gamma, dt=self.dt,
            horizon=self.horizon, delta=self.delta,
            particles_per_blob=int(self.particles_per_blob),
            workers=int(self.workers if workers is None else workers),
            exploratory=self.exploratory,
        ).resolved(self.intensities)

    def out_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)


_FLOAT_KEYS = {"alpha", "horizon", "dt", "delta", "gamma", "pv_dt"}
_INT_KEYS = {"particles_per_blob", "workers", "diag_every"}
_BOOL_KEYS = {"exploratory", "drift"}


def _coerce(key, value):
    if key in _FLOAT_KEYS:
        if value is None or (isinstance(value, str) and value.strip().lower() == "auto"):
            if key in ("dt", "delta"):
                return None
            raise ConfigurationError(f"{key} cannot be auto")
        return float(value)
    if key in _INT_KEYS:
        if float(value) != int(float(value)):
            raise ConfigurationError(f"{key} must be an integer")
        return int(float(value))
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{key} must be true or false")
        return value
    if key == "eps_list":
        return tuple(float(v) for v in value)
    if key == "centers":
        return tuple(tuple(float(c) for c in row) for row in value)
    if key == "intensities":
        return tuple(float(v) for v in value)
    return str(value)


def config_from_mapping(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    missing = sorted(k for k in ("scenario", "centers", "intensities", "eps_list")
                     if k not in data)
    if missing:
        raise ConfigurationError(f"missing config keys: {', '.join(missing)}")
    try:
        kw = {k: _coerce(k, v) for k, v in data.items()}
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad config value: {exc}") from exc
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return config_from_mapping(data)


def _eps_tag(eps: float) -> str:
    return f"{eps:g}"


def _with_context(exc: NumericalError, ctx: str) -> NumericalError:
    if exc.args and isinstance(exc.args[0], str):
        exc.args = (f"[{ctx}] {exc.args[0]}",) + exc.args[1:]
    return exc


# --------------------------------------------------------------------------- #
# single case

@dataclass
class CaseResult:
    eps: float
    r0: float
    dt: float
    delta_reg: float
    n_steps: int
    completed: bool
    final_time: float
    final_delta: float
    max_support: float
    r_m: float | None
    containment: bool
    breach_time: float | None
    sandwich_violations: int
    circulation_exact: bool
    diag_path: str | None = None
    checkpoint_path: str | None = None
    rows: list = field(default_factory=list, repr=False)


def _diag_rows(t, blobs, ref, bounds):
    dev = pv_deviation(blobs, ref)
    rows, viol = [], 0
    for b in blobs:
        m = blob_moments(b)
        R = m.support_radius
        mu = math.nan
        if R > 0.0:
            mp = diagnostic_mollifier(R)
            lo, mid, hi = sandwich(b, mp)
            viol += not (lo <= mid <= hi)
            mu = lo
        rows.append({
            "t": t, "i": b.blob_index, "B1": m.center[0], "B2": m.center[1],
            "I": m.inertia, "Rt": R, "m_half_Rt": mass_tail(b, 0.5 * R), "mu": mu,
            "delta": dev, "support_bound": bounds.support_bound,
            "delta_bound": bounds.delta_bound, "inertia_bound": bounds.inertia_bound,
        })
    return rows, viol


def _reach(blobs, ref) -> float:
    """Largest distance of any particle from its blob's point-vortex position."""
    return max(float(np.max(np.hypot(*(b.positions - z).T)))
               for b, z in zip(blobs, ref.positions))


def run_case(config: ExperimentConfig, eps: float, write: bool = True,
             max_steps: int | None = None, workers: int | None = None) -> CaseResult:
    """Ring simulation and point-vortex reference side by side at one ``eps``.

    Diagnostics are taken every ``config.diag_every`` steps and at the end.
    The case is contained at a diagnostic time when every support radius and
    every particle's distance from its point-vortex position stay within
    ``R_m / 4``, with ``R_m`` the minimum pairwise distance along the
    reference trajectory.  ``max_steps`` truncates the run (``completed`` is
    then false); ``R_m`` is still taken over the full horizon.
    """
    if eps not in config.eps_list:
        raise ConfigurationError(f"eps={eps} is not in eps_list")
    p = config.sim_params(eps, workers)
    ctx = f"{config.scenario} eps={_eps_tag(eps)}"
    try:
        blobs = init_blobs(p, config.centers, config.intensities)
        ref = PointVortexState(config.centers, config.intensities)
        # R_m over the whole horizon, from a run at the point-vortex step
        coarse = pv_integrate(ref, config.horizon, min(config.pv_dt, config.horizon))
    except NumericalError as exc:
        raise _with_context(exc, ctx)
    if ref.n > 1:
        r_m = min(min_separation(s.positions)[0] for s in coarse)
        margin = 0.25 * r_m
    else:
        r_m, margin = None, math.inf
    if p.alpha > 2.0:
        bounds = bound_report(p, 1.0)
    else:  # exploratory: the bounds are not defined
        bounds = BoundReport(config.k, math.nan, math.nan, math.nan, 1.0)

    n_full, rest = step_schedule(config.horizon, p.dt)
    n_steps = n_full + (rest > 0.0)
    todo = n_steps if max_steps is None else min(n_steps, int(max_steps))
    a0 = [math.fsum(b.weights) for b in blobs]
    rows, viol = [], 0
    max_rt, breach = 0.0, None

    def record(blobs, ref):
        nonlocal viol, max_rt, breach
        new, v = _diag_rows(ref.time, blobs, ref, bounds)
        rows.extend(new)
        viol += v
        rt = max(r["Rt"] for r in new)
        max_rt = max(max_rt, rt)
        if breach is None and (rt > margin or _reach(blobs, ref) > margin):
            breach = ref.time

    record(blobs, ref)
    k = 0
    try:
        for k in range(1, todo + 1):
            h = p.dt if k <= n_full else rest
            blobs = advance(blobs, p, dt=h)
            ref = pv_step(ref, h, time=k * p.dt if k <= n_full else config.horizon)
            if k % config.diag_every == 0 or k == todo:
                record(blobs, ref)
    except NumericalError as exc:
        raise _with_context(exc, f"{ctx} step {k}")

    res = CaseResult(
        eps=eps, r0=p.r0, dt=p.dt, delta_reg=p.delta, n_steps=todo,
        completed=todo == n_steps, final_time=ref.time,
        final_delta=pv_deviation(blobs, ref), max_support=max_rt,
        r_m=r_m, containment=breach is None, breach_time=breach,
        sandwich_violations=viol,
        circulation_exact=all(math.fsum(b.weights) == a for b, a in zip(blobs, a0)),
        rows=rows,
    )
    if write:
        out = config.out_dir()
        out.mkdir(parents=True, exist_ok=True)
        tag = _eps_tag(eps)
        res.diag_path = str(out / f"diag_{tag}.csv")
        res.checkpoint_path = str(out / f"checkpoint_{tag}.csv")
        write_diagnostics(res.diag_path, rows)
        write_checkpoint(res.checkpoint_path, blobs)
    return res


def write_diagnostics(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(DIAG_COLUMNS)
        for r in rows:
            wr.writerow([r["t"], r["i"]] + [repr(float(r[c])) for c in DIAG_COLUMNS[2:]])


def estimate_case_seconds(config: ExperimentConfig, eps: float, probes: int = 1) -> tuple[int, float]:
    """Step count of a case and its projected wall time from timed velocity sweeps."""
    p = config.sim_params(eps)
    blobs = init_blobs(p, config.centers, config.intensities)
    t0 = time.perf_counter()
    for _ in range(probes):
        particle_velocities(blobs, p)
    per_eval = (time.perf_counter() - t0) / probes
    n_full, rest = step_schedule(config.horizon, p.dt)
    n = n_full + (rest > 0.0)
    return n, 4.0 * n * per_eval


# --------------------------------------------------------------------------- #
# sweeps

@dataclass
class ConvergenceReport:
    scenario: str
    alpha: float
    k: float
    eps_list: list
    log_abs_log_eps: list
    final_delta: list
    max_support: list
    containment: list
    breach_time: list
    completed: list
    r_m: float | None
    delta_slope: float
    delta_slope_predicted: float
    delta_residual: float
    delta_fit_const: float
    support_slope: float
    support_slope_predicted: float
    support_residual: float
    support_fit_const: float
    delta_monotone: bool
    support_monotone: bool
    pre_asymptotic: bool
    epsilon0: float | None


def fit_rate(x, y) -> tuple[float, float, float]:
    """OLS of ``log y`` on ``x``: slope, ``exp(intercept)``, max abs residual."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise FitError(f"need at least 3 points to fit a rate, got {len(x)}")
    if np.any(~(y > 0.0)):
        return math.nan, math.nan, math.inf
    ly = np.log(y)
    slope, icpt = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + icpt)
    return float(slope), float(math.exp(icpt)), float(np.max(np.abs(resid)))


def _strictly_decreasing(v) -> bool:
    return all(b < a for a, b in zip(v, v[1:]))


def _case_job(args):
    config, eps, workers = args
    return run_case(config, eps, write=True, workers=workers)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def _check_sweep(eps_list) -> None:
    if len(eps_list) < 3:
        raise FitError(f"a sweep needs at least 3 eps values, got {len(eps_list)}")
    if math.log10(max(eps_list) / min(eps_list)) < 2.0 - 1e-12:
        raise FitError("eps values must span at least two decades")


def sweep_and_fit(config: ExperimentConfig, write: bool = True) -> ConvergenceReport:
    """Run every ``eps`` and fit log-log rates against ``|log eps|``.

    Cases run in separate processes when ``config.workers > 1``.  If any case
    fails, the completed ones are written to ``report_partial.json`` before
    the error propagates.
    """
    eps_list = list(config.eps_list)
    _check_sweep(eps_list)
    out = config.out_dir()
    results: dict[float, CaseResult] = {}
    jobs = [(config, e, 1 if config.workers > 1 else None) for e in eps_list]
    try:
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as ex:
                for e, r in zip(eps_list, ex.map(_case_job, jobs)):
                    results[e] = r
        else:
            for job in jobs:
                results[job[1]] = _case_job(job)
    except Exception:
        if results:
            out.mkdir(parents=True, exist_ok=True)
            partial = [{k: v for k, v in asdict(r).items() if k != "rows"}
                       for r in results.values()]
            with open(out / "report_partial.json", "w") as fh:
                json.dump(partial, fh, indent=2, default=_json_default)
        raise

    cases = [results[e] for e in eps_list]
    x = [math.log(abs(math.log(e))) for e in eps_list]
    dvals = [c.final_delta for c in cases]
    svals = [c.max_support for c in cases]
    ds, dc, dr = fit_rate(x, dvals)
    ss, sc, sr = fit_rate(x, svals)
    r_m = cases[0].r_m
    eps0 = None
    if r_m is not None and config.k > 0.0 and sc > 0.0 and math.isfinite(sc):
        eps0 = solve_epsilon0(sc, r_m, config.k)
    rep = ConvergenceReport(
        scenario=config.scenario, alpha=config.alpha, k=config.k,
        eps_list=eps_list, log_abs_log_eps=x, final_delta=dvals, max_support=svals,
        containment=[c.containment for c in cases],
        breach_time=[c.breach_time for c in cases],
        completed=[c.completed for c in cases], r_m=r_m,
        delta_slope=ds, delta_slope_predicted=-(config.alpha - 1.0),
        delta_residual=dr, delta_fit_const=dc,
        support_slope=ss, support_slope_predicted=-config.k,
        support_residual=sr, support_fit_const=sc,
        delta_monotone=_strictly_decreasing(dvals),
        support_monotone=_strictly_decreasing(svals),
        pre_asymptotic=max(dr, sr) > PRE_ASYMPTOTIC_RESIDUAL,
        epsilon0=eps0,
    )
    if write:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w") as fh:
            json.dump(asdict(rep), fh, indent=2, default=_json_default)
    return rep


# --------------------------------------------------------------------------- #
# point vortices only

def pv_run(config: ExperimentConfig, write: bool = True):
    """Point-vortex trajectory of the configured centres over the horizon."""
    state = PointVortexState(config.centers, config.intensities)
    traj = pv_integrate(state, config.horizon, config.pv_dt, drift=config.drift)
    if write:
        out = config.out_dir()
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "pv_trajectory.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(("t", "i", "z1", "z2"))
            for s in traj:
                for i, z in enumerate(s.positions):
                    wr.writerow((repr(s.time), i, repr(float(z[0])), repr(float(z[1]))))
        with open(out / "pv_invariants.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(("t", "H", "P1", "P2", "A"))
            for s in traj:
                inv = pv_invariants(s)
                wr.writerow([repr(s.time)] + [repr(float(v)) for v in (
                    inv.hamiltonian, inv.linear_impulse[0], inv.linear_impulse[1],
                    inv.angular_impulse)])
    return traj
