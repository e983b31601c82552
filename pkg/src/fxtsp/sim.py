"""Simulation, settling-time measurement, sweeps and Lyapunov monitoring."""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import certify as cert
from . import integrator
from .errors import (CapabilityError, DivergenceError, IntegrationError, InvalidParameterError,
                     StiffnessError)

DEFAULT_SEED = 0xF1C5ED
TRANSIENT_WINDOW_EPS = 10.0
THREADS_ENV = "FXTSP_THREADS"


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    # None lets the integrator pick the first step from the initial slope.
    dt_init: Optional[float] = None
    dt_max_per_eps: float = 0.2
    t_max: float = 50.0
    settle_radius: float = 1e-6
    dwell: float = 1.0
    max_steps: int = 20_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "dt_max_per_eps", "t_max", "settle_radius", "dwell"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidParameterError(f"{name} must be positive and finite, got {v!r}")
        if self.dt_init is not None and not self.dt_init > 0:
            raise InvalidParameterError("dt_init must be positive when given")
        if self.dwell > self.t_max:
            raise InvalidParameterError("dwell must not exceed t_max")
        if int(self.max_steps) < 1:
            raise InvalidParameterError("max_steps must be positive")

    def to_record(self):
        return {k: getattr(self, k) for k in
                ("rel_tol", "abs_tol", "dt_init", "dt_max_per_eps", "t_max", "settle_radius", "dwell", "max_steps")}


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # rows are (x, z)
    slow_dim: int
    V: np.ndarray
    W: np.ndarray
    Psi: np.ndarray
    settle_time: Optional[float]
    step_rejections: int
    steps: int
    eps: float

    @property
    def x(self):
        return self.states[:, : self.slow_dim]

    @property
    def z(self):
        return self.states[:, self.slow_dim:]

    def norms(self):
        return np.linalg.norm(self.states, axis=1)


def quadratic_diagnostics(model, theta=0.5):
    """V = |x|^2/2, W = |z - h(x)|^2/2 and their theta-blend."""
    def diag(x, z):
        y = z - model.h(x)
        V = 0.5 * np.sum(x * x, axis=-1)
        W = 0.5 * np.sum(y * y, axis=-1)
        return V, W, theta * V + (1 - theta) * W
    return diag


def certificate_diagnostics(model, rc, bc, theta):
    def diag(x, z):
        y = z - model.h(x)
        V = rc.V(x)
        W = bc.W(x, y)
        return V, W, theta * V + (1 - theta) * W
    return diag


def integrate(model, eps, x0, z0, cfg=None, diagnostics=None):
    """Adaptive stiff integration from (x0, z0); stops once settled for ``cfg.dwell``."""
    cfg = cfg or IntegratorConfig()
    if not (math.isfinite(eps) and eps > 0):
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    if model.kernel is None:
        raise CapabilityError("this model has no compiled kernel; only built-in systems can be integrated")
    x0 = model.check_slow(np.atleast_1d(np.asarray(x0, dtype=float)))
    z0 = model.check_fast(np.atleast_1d(np.asarray(z0, dtype=float)))
    kind, params = model.kernel
    u0 = np.concatenate([x0, z0 - model.h(x0)])
    status, t_end, settle, accepted, rejected, times, states, count, u_end = integrator.run(
        kind, np.asarray(params, dtype=float), model.slow_dim, float(eps), u0, float(cfg.t_max),
        float(cfg.rel_tol), float(cfg.abs_tol), float(cfg.dt_init or 0.0),
        float(cfg.dt_max_per_eps * eps), float(cfg.settle_radius), float(cfg.dwell),
        int(cfg.max_steps), True)
    times = times[:count].copy()
    states = states[:count].copy()
    if status == integrator.STATUS_UNDERFLOW:
        raise StiffnessError(f"step size underflow at t = {t_end:.17g}", t_end, states[-1])
    if status == integrator.STATUS_DIVERGED:
        raise DivergenceError(f"state diverged at t = {t_end:.17g}", t_end, states[-1])
    if status == integrator.STATUS_BUDGET:
        raise IntegrationError(f"step budget {cfg.max_steps} exhausted at t = {t_end:.17g}", t_end, states[-1])
    diag = diagnostics or quadratic_diagnostics(model)
    n = model.slow_dim
    V, W, Psi = diag(states[:, :n], states[:, n:])
    return Trajectory(times, states, n, np.asarray(V, float), np.asarray(W, float), np.asarray(Psi, float),
                      settle if settle >= 0 else None, int(rejected), int(accepted), float(eps))


def settling_time(traj, radius, dwell):
    """Start of the first inside-the-ball run that is observed to last ``dwell``."""
    if len(traj.times) == 0:
        raise InvalidParameterError("empty trajectory")
    inside = traj.norms() <= radius
    t = traj.times
    start = None
    for i in range(len(t)):
        if not inside[i]:
            start = None
            continue
        if start is None:
            start = t[i]
        if t[i] - start >= dwell:
            return float(start)
    return None


def sweep_directions(dim, count, seed=DEFAULT_SEED):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, dim))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _thread_count():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidParameterError(f"{THREADS_ENV} must be an integer, got {raw!r}")


def sweep(model, eps, magnitudes, directions=8, cfg=None, seed=DEFAULT_SEED):
    """Settling time from magnitude * direction for every (magnitude, direction) cell.

    Returns {"rows": [(magnitude, direction_index, settle_time or None, error or None)],
    "max_by_magnitude": {magnitude: max settle time or None}}.
    """
    cfg = cfg or IntegratorConfig()
    mags = [float(m) for m in magnitudes]
    if any(m < 0 for m in mags) or mags != sorted(mags):
        raise InvalidParameterError("magnitudes must be nonnegative and sorted ascending")
    n, m = model.slow_dim, model.fast_dim
    dirs = sweep_directions(n + m, int(directions), seed)
    cells = [(mag, j) for mag in mags for j in range(len(dirs))]

    def run(cell):
        mag, j = cell
        if mag == 0:
            return mag, j, 0.0, None
        s = mag * dirs[j]
        try:
            traj = integrate(model, eps, s[:n], s[n:], cfg)
        except IntegrationError as exc:
            return mag, j, None, f"{type(exc).__name__}: {exc}"
        return mag, j, traj.settle_time, None

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    max_by = {}
    for mag in mags:
        vals = [r[2] for r in rows if r[0] == mag]
        max_by[mag] = None if any(v is None for v in vals) else max(vals)
    return {"rows": rows, "max_by_magnitude": max_by}


def monitor_lyapunov(model, rc, bc, theta, gamma1, gamma2, lambda_min, traj, eps=None,
                     rate_mode=False, transient=None, rtol=1e-6):
    """Count Psi increases after the boundary-layer transient and, in rate mode,
    samples violating Psidot <= -(lambda/2)(Psi^g1 + 2^(1-g2) Psi^g2).

    An increase is flagged when Psi[k+1] > Psi[k] + rtol * Psi[k] + tiny, where
    rtol covers the integration tolerance.
    """
    eps = traj.eps if eps is None else eps
    window = TRANSIENT_WINDOW_EPS * eps if transient is None else transient
    n = model.slow_dim
    x = traj.states[:, :n]
    y = traj.states[:, n:] - model.h(x)
    V, W = rc.V(x), bc.W(x, y)
    psi = theta * V + (1 - theta) * W
    keep = traj.times >= window
    idx = np.flatnonzero(keep)
    report = {"transient_window": window, "samples": int(idx.size), "monotonicity_violations": 0,
              "worst_increase": 0.0, "rate_checked": bool(rate_mode)}
    if idx.size >= 2:
        a, b = psi[idx[:-1]], psi[idx[1:]]
        tol = rtol * a + 1e-300
        inc = b - a
        report["monotonicity_violations"] = int(np.sum(inc > tol))
        rel = np.where(a > 0, inc / np.where(a > 0, a, 1.0), np.where(inc > 0, np.inf, 0.0))
        report["worst_increase"] = float(max(0.0, rel.max()))
    if rate_mode:
        rate = decrease_report(model, rc, bc, theta, gamma1, gamma2, lambda_min, eps, x[idx], y[idx])
        report.update({"rate_violations": rate["violations"], "rate_worst_gap": rate["worst_gap"]})
    report["violations"] = report["monotonicity_violations"] + report.get("rate_violations", 0)
    return report


def decrease_report(model, rc, bc, theta, gamma1, gamma2, lambda_min, eps, x, y, slack=1e-6):
    """Pointwise check of the composite decrease inequality at given states.

    The slack is relative to |right side| + |Psidot|.
    """
    lie = cert.composite_lie_derivative(model, rc, bc, theta, eps, x, y)
    psi = theta * rc.V(x) + (1 - theta) * bc.W(x, y)
    rhs = cert.decrease_rate(lambda_min, gamma1, gamma2, psi)
    gap = rhs - lie
    scale = np.abs(rhs) + np.abs(lie)
    bad = ~(gap >= -slack * scale)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, gap / scale, 0.0)
    i = int(np.argmin(rel)) if rel.size else 0
    return {
        "samples": int(np.size(gap)),
        "violations": int(np.sum(bad)),
        "worst_gap": float(rel[i]) if rel.size else 0.0,
        "witness": {"x": np.asarray(x)[i].tolist(), "y": np.asarray(y)[i].tolist()} if rel.size else None,
    }


def random_states(model, samples, seed=DEFAULT_SEED, log_range=(-6.0, 6.0)):
    """States with log-uniform magnitudes in each of x and y independently."""
    rng = np.random.default_rng(seed)
    n, m = model.slow_dim, model.fast_dim
    dx = rng.normal(size=(samples, n))
    dy = rng.normal(size=(samples, m))
    dx /= np.linalg.norm(dx, axis=1, keepdims=True)
    dy /= np.linalg.norm(dy, axis=1, keepdims=True)
    x = dx * 10.0 ** rng.uniform(*log_range, (samples, 1))
    y = dy * 10.0 ** rng.uniform(*log_range, (samples, 1))
    return x, y
