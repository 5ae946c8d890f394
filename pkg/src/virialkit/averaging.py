"""Trajectory integration, time averages, period detection and virial reports.

Integration steps scipy's embedded Runge-Kutta 4(5) pair (``RK45``, or
``DOP853`` on request) and keeps its native dense output, sampled on a uniform grid of step ``dense_dt``. Time
averages are trapezoid sums over those samples, so their accuracy does not
depend on where the adaptive stepper happened to put its steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853, RK45, OdeSolution
from scipy.optimize import brentq

from .errors import GuardTripped, OutOfChart, PeriodExceedsSpan, StepSizeUnderflow
from .system import Dynamics

CESARO_TOL = 1e-3
BOUND_GROWTH = 1e-3


@dataclass(frozen=True)
class IntegratorSettings:
    t_max: float
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = np.inf
    dense_dt: Optional[float] = None  # defaults to t_max / 1000
    method: str = "RK45"

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.dense_dt is not None and not (0 < self.dense_dt <= self.t_max / 100):
            raise ValueError("dense_dt must lie in (0, t_max / 100]")

    @property
    def dt(self) -> float:
        return self.dense_dt if self.dense_dt is not None else self.t_max / 1000


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    settings: IntegratorSettings
    interpolant: Optional[Callable] = field(default=None, repr=False)
    stats: dict = field(default_factory=dict)
    aborted: bool = False
    message: str = ""

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])

    def __call__(self, t) -> np.ndarray:
        """State at time(s) ``t``; ``t`` scalar gives shape ``(dim,)``."""
        t = np.asarray(t, dtype=float)
        if self.interpolant is None:
            out = np.stack([np.interp(t, self.times, c) for c in self.states.T], axis=-1)
            return out
        return np.moveaxis(self.interpolant(t), 0, -1)


SOLVERS = {"RK45": RK45, "DOP853": DOP853}
# smallest step, relative to max(1, t), tried when a trial stage leaves the chart
MIN_RETRY_STEP = 1e-12


def _last_inside(guard, interp, t_in: float, t_out: float) -> float:
    """Bisect the dense interpolant for the last time the guard still holds."""
    for _ in range(60):
        mid = 0.5 * (t_in + t_out)
        if mid in (t_in, t_out):
            break
        if np.all(guard(interp(mid))):
            t_in = mid
        else:
            t_out = mid
    return t_in


def integrate(
    field_fn: Callable[[float, np.ndarray], np.ndarray],
    s0,
    cfg: IntegratorSettings,
    guard: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    raise_on_guard: bool = True,
) -> Trajectory:
    """Integrate ``ds/dt = field_fn(t, s)`` from ``s0`` over ``[0, cfg.t_max]``.

    If ``guard(s)`` turns false the run stops; the partial trajectory is
    attached to :class:`GuardTripped` (or returned with ``aborted=True`` when
    ``raise_on_guard`` is false). A trial stage that leaves the chart
    (``OutOfChart`` from the field) makes the step shrink and retry, so the
    run marches up to the chart boundary before it aborts.
    """
    s0 = np.asarray(s0, dtype=float)
    if guard is not None and not np.all(guard(s0)):
        raise GuardTripped("initial state is outside the chart", None)
    times, pieces = [0.0], []
    aborted, message = False, ""
    with np.errstate(over="raise", divide="raise", invalid="raise"):
        try:
            solver = SOLVERS[cfg.method](
                field_fn, 0.0, s0, cfg.t_max, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step
            )
            while solver.status == "running":
                try:
                    msg = solver.step()
                except OutOfChart as exc:
                    if solver.h_abs <= MIN_RETRY_STEP * max(1.0, abs(solver.t)):
                        aborted, message = True, f"trial stage left the chart: {exc}"
                        break
                    solver.h_abs *= 0.25
                    continue
                if solver.status == "failed":
                    raise StepSizeUnderflow(msg or "step size underflow")
                interp = solver.dense_output()
                if guard is not None and not np.all(guard(solver.y)):
                    t_in = _last_inside(guard, interp, solver.t_old, solver.t)
                    times.append(t_in)
                    pieces.append(interp)
                    aborted, message = True, "domain guard turned false"
                    break
                times.append(solver.t)
                pieces.append(interp)
        except FloatingPointError as exc:
            raise StepSizeUnderflow(f"floating-point failure during integration: {exc}") from exc
    if not pieces:
        raise GuardTripped(f"no step could be taken inside the chart: {message}", None)
    sol = OdeSolution(np.array(times), pieces)
    t_end = times[-1]
    dt = cfg.dt
    n = int(np.floor(t_end / dt + 1e-9))
    grid = dt * np.arange(n + 1)
    if t_end - grid[-1] > 1e-9 * dt:
        grid = np.append(grid, t_end)
    else:
        grid[-1] = t_end
    states = sol(grid).T
    states[0] = s0
    stats = {"nfev": int(solver.nfev), "n_steps": len(pieces), "t_end": t_end, "method": cfg.method}
    traj = Trajectory(grid, states, cfg, sol, stats, aborted, message)
    if aborted and raise_on_guard:
        raise GuardTripped(f"domain guard tripped at t = {t_end:.6g}", traj)
    return traj


def integrate_dynamics(dyn: Dynamics, s0, cfg: IntegratorSettings, raise_on_guard: bool = True) -> Trajectory:
    """Integrate a model's dynamics; records conserved-quantity drift in ``stats``."""
    try:
        traj = integrate(dyn.field, s0, cfg, guard=dyn.in_chart, raise_on_guard=raise_on_guard)
    except GuardTripped as exc:
        if exc.trajectory is not None:
            _finish(dyn, exc.trajectory)
        raise
    return _finish(dyn, traj)


def _finish(dyn: Dynamics, traj: Trajectory) -> Trajectory:
    if dyn.project is not None:
        traj.states = dyn.project(traj.states)
        traj.stats["projected"] = True
    traj.stats["drift"] = conserved_drift(dyn, traj)
    return traj


def conserved_drift(dyn: Dynamics, traj: Trajectory) -> dict[str, float]:
    """Maximum deviation of each conserved quantity from its initial value."""
    values = dyn.conserved(traj.states)
    return {k: float(np.max(np.abs(v - v[0]))) for k, v in values.items()}


@dataclass(frozen=True)
class AverageResult:
    value: float
    half_value: float
    boundary_term: Optional[float]
    converged: bool
    bound_warning: bool
    span: float


def _mean(values: np.ndarray, times: np.ndarray) -> float:
    """Trapezoid mean, taken about the first sample so constants come out exact."""
    base = values[0]
    return float(base + np.trapezoid(values - base, times) / (times[-1] - times[0]))


def bound_growth(values: np.ndarray, delta: float = BOUND_GROWTH) -> bool:
    """True when ``max|values|`` grows strictly over the three thirds of the run."""
    v = np.abs(np.asarray(values, dtype=float))
    if v.size < 3:
        return False
    thirds = [np.max(w) for w in np.array_split(v, 3)]
    return bool(thirds[1] > (1 + delta) * thirds[0] and thirds[2] > (1 + delta) * thirds[1])


def time_average(
    F: Callable[[np.ndarray], np.ndarray],
    traj: Trajectory,
    period: Optional[float] = None,
    tol: float = CESARO_TOL,
    G: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> AverageResult:
    """Time average of ``F(states)`` along ``traj``.

    Without ``period`` this is the Cesaro average over the whole run,
    compared against the first-half average. With ``period`` exactly one
    period from ``t = 0`` is integrated. ``G`` (optional) is the virial
    function whose boundary term ``(G(end) - G(start)) / T`` is reported.
    """
    times, states = traj.times, traj.states
    if times.size < 2:
        raise ValueError("trajectory needs at least two samples")
    if period is not None:
        if period > traj.span * (1 + 1e-12):
            raise PeriodExceedsSpan(f"period {period:.6g} exceeds trajectory span {traj.span:.6g}")
        keep = times < period
        times = np.append(times[keep], period)
        states = np.vstack([states[keep], traj(period)[None, :]])
    values = np.asarray(F(states), dtype=float)
    T = float(times[-1] - times[0])
    value = _mean(values, times)
    half = times <= times[0] + T / 2
    th = times[half]
    if th[-1] < times[0] + T / 2:
        # close the half interval by linear interpolation of the sampled values
        tm = times[0] + T / 2
        vh = np.append(values[half], np.interp(tm, times, values))
        th = np.append(th, tm)
    else:
        vh = values[half]
    half_value = _mean(vh, th)
    boundary = None
    warn = False
    if G is not None:
        g = np.asarray(G(states), dtype=float)
        boundary = float((g[-1] - g[0]) / T)
        warn = bound_growth(g)
    converged = abs(value - half_value) <= tol * (1 + abs(value))
    return AverageResult(value, float(half_value), boundary, bool(converged), warn, T)


def _wrap(diff: np.ndarray, angles) -> np.ndarray:
    if angles:
        diff = diff.copy()
        idx = list(angles)
        diff[..., idx] = (diff[..., idx] + np.pi) % (2 * np.pi) - np.pi
    return diff


def detect_period(
    traj: Trajectory,
    eps: float = 1e-3,
    field_fn: Optional[Callable] = None,
    angles: tuple[int, ...] = (),
    t_min: Optional[float] = None,
) -> Optional[float]:
    """First return time of the state to an ``eps``-ball around the initial state.

    Distances are relative to the state scale and angle components are
    compared modulo ``2 pi``. Every local minimum of the sampled distance
    that could hide a return is refined on the dense interpolant as a root
    of ``d/dt |s(t) - s0|^2 / 2`` (using ``field_fn`` when given, finite
    differences otherwise); the first refined minimum inside the ball wins.
    """
    s0 = traj.states[0]
    scale = max(1.0, float(np.max(np.abs(s0))))
    dist = np.linalg.norm(_wrap(traj.states - s0, angles), axis=-1) / scale
    times = traj.times
    if len(times) < 3:
        return None
    # a return can hide between samples when the state moves this far per sample
    hop = float(np.max(np.linalg.norm(_wrap(np.diff(traj.states, axis=0), angles), axis=-1))) / scale
    near = max(eps, 2 * hop)
    if t_min is None:
        away = np.nonzero(dist > 2 * near)[0]
        if away.size == 0:
            return None
        start = int(away[0])
    else:
        start = int(np.searchsorted(times, t_min))

    def slope(t):
        s = traj(t)
        d = _wrap(s - s0, angles)
        if field_fn is not None:
            v = field_fn(t, s)
        else:
            h = 1e-6 * max(1.0, abs(t))
            v = (traj(t + h) - traj(t - h)) / (2 * h)
        return float(d @ v)

    def distance(t):
        return float(np.linalg.norm(_wrap(traj(t) - s0, angles))) / scale

    inner = np.arange(max(start, 1), len(times) - 1)
    minima = inner[(dist[inner] <= dist[inner - 1]) & (dist[inner] <= dist[inner + 1]) & (dist[inner] < near)]
    for i in minima:
        lo, hi = times[i - 1], times[i + 1]
        a, b = slope(lo), slope(hi)
        t_star = float(brentq(slope, lo, hi, xtol=1e-14, rtol=1e-14)) if a < 0 < b else float(times[i])
        if distance(t_star) < eps:
            return t_star
    return None


@dataclass(frozen=True)
class VirialEntry:
    name: str
    cesaro: float
    half: float
    periodic: Optional[float]
    boundary_term: float
    residual: float
    tolerance: float
    converged: bool
    bound_warning: bool
    max_abs_G: float

    @property
    def consistent(self) -> bool:
        return self.residual <= 10 * self.tolerance


@dataclass
class VirialReport:
    model: str
    formalism: str
    span: float
    period: Optional[float]
    entries: dict[str, VirialEntry]
    drift: dict[str, float]
    stats: dict
    aborted: bool = False

    @property
    def consistent(self) -> bool:
        return all(e.consistent for e in self.entries.values())


def residual_tolerance(integrand_values, times, G_values, grad_norm, traj: Trajectory) -> float:
    """Tolerance for ``|<dG/dt> - (G(T) - G(0)) / T|`` on this trajectory.

    Sum of a Richardson estimate of the trapezoid error (full grid against
    every other sample) and the accumulated integrator error in ``G``,
    bounded by steps times the local tolerance times ``max |grad G|``.
    """
    T = float(times[-1] - times[0])
    full = np.trapezoid(integrand_values, times)
    if len(times) >= 5:
        coarse_idx = np.arange(0, len(times), 2)
        if coarse_idx[-1] != len(times) - 1:
            coarse_idx = np.append(coarse_idx, len(times) - 1)
        coarse = np.trapezoid(integrand_values[coarse_idx], times[coarse_idx])
        quad = abs(full - coarse) / 3.0
    else:
        quad = 0.0
    cfg = traj.settings
    ymax = float(np.max(np.abs(traj.states)))
    steps = max(traj.stats.get("n_steps", 1), 1)
    integ = steps * (cfg.atol + cfg.rtol * ymax) * float(np.max(grad_norm))
    # floating-point floor for the two sides
    fp = 64 * np.finfo(float).eps * (float(np.max(np.abs(G_values))) / T + float(np.max(np.abs(integrand_values))))
    return quad / T + integ / T + fp


def virial_report(
    dyn: Dynamics,
    traj: Trajectory,
    names: Optional[list[str]] = None,
    period: Optional[float] = None,
    tol: float = CESARO_TOL,
) -> VirialReport:
    """Average every registered (or listed) virial integrand along ``traj``."""
    names = list(dyn.virials) if names is None else list(names)
    x, y = dyn.split(traj.states)
    entries = {}
    for name in names:
        vf = dyn.virials[name]
        g = vf.value(x, y)
        vals = vf.integrand(x, y)
        res = time_average(lambda s: vals, traj, tol=tol)
        boundary = float((g[-1] - g[0]) / traj.span)
        periodic = None
        if period is not None and period <= traj.span:
            periodic = time_average(
                lambda s: vf.integrand(*dyn.split(s)), traj, period=period
            ).value
        tolerance = residual_tolerance(vals, traj.times, g, vf.grad_norm(x, y), traj)
        entries[name] = VirialEntry(
            name,
            res.value,
            res.half_value,
            periodic,
            boundary,
            abs(res.value - boundary),
            tolerance,
            res.converged,
            bound_growth(g),
            float(np.max(np.abs(g))),
        )
    drift = traj.stats.get("drift") or conserved_drift(dyn, traj)
    return VirialReport(dyn.model, dyn.formalism, traj.span, period, entries, drift, dict(traj.stats), traj.aborted)
