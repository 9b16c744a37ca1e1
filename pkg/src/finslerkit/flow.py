"""Geodesic flow integration and first-integral drift measurement.

The geodesic equation in spray form is the first-order system

    dx/dt = y,      dy/dt = -2 G(x, y)

integrated with an embedded Dormand-Prince 5(4) pair, PI step-size
control and the FSAL optimization.  The integrator is hand-rolled rather
than delegated so the domain-guard contract is exact: a step whose stages
leave the metric's domain is rejected and retried smaller, and when the
trajectory approaches the guard boundary within ``exit_margin`` the final
step is refined by bisection so every emitted sample stays strictly
inside the smooth region (near the boundary the fundamental tensor's
condition number blows up and field evaluations turn to noise).

Drift of registered scalar fields is measured at output samples only,
never at internal stages, so the measurement is decoupled from step
control.  Relative drift uses denominator max(|initial|, 1e-8).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import integrals, metrics
from .errors import FinslerError, StepFailure
from .tensors import PhasePoint, PointEvaluation, spray_values

__all__ = [
    "IntegrateSettings",
    "IntegratorStats",
    "Trajectory",
    "FieldDrift",
    "DriftReport",
    "geodesic_rhs",
    "integrate",
    "drift",
    "trajectory_csv",
]

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0)
_B4 = (
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
)
_ERR = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))

_A_NP = tuple(np.array(row) for row in _A)
_B5_NP = np.array(_B5)
_ERR_NP = np.array(_ERR)


@dataclass(frozen=True)
class IntegrateSettings:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 200_000
    max_samples: int = 400
    # stop this far (in guard distance) before the domain boundary
    exit_margin: float = 2e-4
    safety: float = 0.9


@dataclass(frozen=True)
class IntegratorStats:
    steps: int
    rejections: int
    nfev: int
    min_step: float


@dataclass(frozen=True)
class Trajectory:
    ts: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    status: str  # completed | domain_exit | step_failure
    stats: IntegratorStats

    def __len__(self):
        return len(self.ts)

    @property
    def samples(self):
        """Iterator of (t, x, y) rows."""
        return zip(self.ts, self.xs, self.ys)


@dataclass(frozen=True)
class FieldDrift:
    initial: float
    max_abs_dev: float
    max_rel_drift: float
    t_at_max: float


@dataclass(frozen=True)
class DriftReport:
    fields: dict[str, FieldDrift] = field(default_factory=dict)
    tol: float = 1e-6
    passed: bool = True


def geodesic_rhs(spec, state):
    """(dx/dt, dy/dt) = (y, -2 G(x, y))."""
    x, y = state
    G = spray_values(spec, PhasePoint(x, y))
    return np.array(y, dtype=float), -2.0 * G


def _rhs_flat(spec, t_state):
    n = len(t_state) // 2
    dx, dy = geodesic_rhs(spec, (t_state[:n], t_state[n:]))
    return np.concatenate([dx, dy])


def _initial_step(spec, state, f0, t_max, rtol, atol):
    sc = atol + rtol * np.abs(state)
    d0 = math.sqrt(float(np.mean((state / sc) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / sc) ** 2)))
    h0 = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    h0 = min(h0, 0.1 * t_max)
    try:
        f1 = _rhs_flat(spec, state + h0 * f0)
    except FinslerError:
        return h0 * 0.1
    d2 = math.sqrt(float(np.mean(((f1 - f0) / sc) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, t_max)


def _thin(indices_len: int, max_samples: int) -> np.ndarray:
    if indices_len <= max_samples:
        return np.arange(indices_len)
    idx = np.unique(np.round(np.linspace(0, indices_len - 1, max_samples)).astype(int))
    return idx


def _build_trajectory(ts, states, n, status, steps, rejections, nfev, min_step, max_samples):
    ts = np.asarray(ts)
    states = np.asarray(states)
    keep = _thin(len(ts), max_samples)
    stats = IntegratorStats(steps=steps, rejections=rejections, nfev=nfev, min_step=min_step)
    return Trajectory(
        ts=ts[keep], xs=states[keep, :n], ys=states[keep, n:], status=status, stats=stats
    )


def integrate(spec, init, t_max: float, settings: IntegrateSettings | None = None) -> Trajectory:
    """Integrate the geodesic flow from ``init = (x0, y0)`` for t in [0, t_max]."""
    if t_max <= 0.0:
        raise ValueError("t_max must be positive")
    return _integrate_signed(spec, init, t_max, settings)


def _integrate_signed(spec, init, t_max: float, settings: IntegrateSettings | None = None) -> Trajectory:
    """Signed-span core; t_max < 0 integrates the flow backwards in time."""
    if settings is None:
        settings = IntegrateSettings()
    x0, y0 = init
    p0 = PhasePoint(x0, y0)
    metrics.check_domain(spec, p0.x, p0.y)
    n = len(p0.x)
    direction = 1.0 if t_max > 0 else -1.0
    span = abs(t_max)

    state = np.concatenate([np.array(p0.x), np.array(p0.y)])
    elapsed = 0.0
    f_cur = _rhs_flat(spec, state)
    nfev = 1
    h = _initial_step(spec, state, direction * f_cur, span, settings.rtol, settings.atol)
    steps = rejections = 0
    min_step = math.inf
    err_prev = 1.0

    ts = [0.0]
    states = [state.copy()]

    def guard(s):
        return metrics.guard_distance(spec, s[:n])

    def done(status):
        return _build_trajectory(
            ts, states, n, status, steps, rejections, nfev, min_step, settings.max_samples
        )

    def fail(message):
        raise StepFailure(message, trajectory=done("step_failure"))

    ks = np.empty((7, 2 * n))
    while span - elapsed > 1e-12 * span:
        if steps + rejections > settings.max_steps:
            fail(f"exceeded {settings.max_steps} steps at t = {elapsed:.6g}")
        h = min(h, span - elapsed)
        if h <= 1e-14 * max(1.0, elapsed):
            fail(f"step size underflow at t = {elapsed:.6g}")
        h_signed = direction * h

        ks[0] = f_cur
        try:
            for i in range(1, 7):
                yi = state + h_signed * (ks[:i].T @ _A_NP[i])
                ks[i] = _rhs_flat(spec, yi)
                nfev += 1
        except FinslerError:
            # a stage left the metric's domain: retry with a smaller step
            rejections += 1
            h *= 0.25
            continue
        new_state = state + h_signed * (ks.T @ _B5_NP)
        err_vec = h_signed * (ks.T @ _ERR_NP)
        sc = settings.atol + settings.rtol * np.maximum(np.abs(state), np.abs(new_state))
        err = math.sqrt(float(np.mean((err_vec / sc) ** 2)))

        if err <= 1.0:
            # PI controller (orders 5/4): exponents 0.7/5 and 0.4/5
            grow = settings.safety * max(err, 1e-10) ** -0.14 * err_prev**0.08
            err_prev = max(err, 1e-10)
            factor = min(5.0, max(0.2, grow))
            steps += 1
            min_step = min(min_step, h)

            if guard(new_state) <= settings.exit_margin:
                advance, state_exit, extra_nfev = _refine_exit(
                    spec, state, f_cur, elapsed, h, direction, settings.exit_margin, guard
                )
                nfev += extra_nfev
                if advance > 0.0:
                    ts.append(elapsed + advance)
                    states.append(state_exit)
                return done("domain_exit")

            elapsed += h
            state = new_state
            f_cur = ks[6].copy()  # FSAL
            ts.append(elapsed)
            states.append(state.copy())
            h *= factor
        else:
            rejections += 1
            err_prev = 1.0
            h *= min(1.0, max(0.2, settings.safety * err**-0.2))
    return done("completed")


def _rk_step(spec, state, f0, h_signed):
    """One raw DP5 step; returns (new_state, new_f, nfev)."""
    ks = np.empty((7, len(state)))
    ks[0] = f0
    for i in range(1, 7):
        yi = state + h_signed * (ks[:i].T @ _A_NP[i])
        ks[i] = _rhs_flat(spec, yi)
    new_state = state + h_signed * (ks.T @ _B5_NP)
    return new_state, ks[6], 6


def _refine_exit(spec, state, f0, elapsed, h, direction, margin, guard):
    """Bisect the final step so the last sample sits just inside the margin.

    Repeatedly halves the step, advancing whenever the half-step endpoint
    is still outside the margin zone.  The returned state satisfies
    guard > margin, i.e. is strictly inside the domain; the first value is
    the elapsed-time advance past the refinement's starting point.
    """
    nfev = 0
    advance = 0.0
    for _ in range(80):
        if h < 1e-13 * max(1.0, elapsed + advance):
            break
        try:
            cand, f_cand, used = _rk_step(spec, state, f0, direction * h)
            nfev += used
        except FinslerError:
            h *= 0.5
            continue
        if guard(cand) > margin:
            state, f0 = cand, f_cand
            advance += h
            if guard(state) <= margin * 1.0625:
                break
        else:
            h *= 0.5
    return advance, state, nfev


def drift(spec, traj: Trajectory, fields, tol: float = 1e-6) -> DriftReport:
    """Evaluate fields at every trajectory sample and report drift."""
    fields = list(fields)
    order = integrals.field_order(spec, fields)
    rows = []
    for t, x, y in traj.samples:
        ev = PointEvaluation(spec, PhasePoint(x, y), order=order)
        rows.append((t, integrals.evaluate_fields(spec, fields, None, ev=ev)))
    report_fields = {}
    passed = True
    for name in fields:
        initial = rows[0][1][name]
        denom = max(abs(initial), 1e-8)
        max_abs = 0.0
        t_at = rows[0][0]
        for t, vals in rows:
            dev = abs(vals[name] - initial)
            if dev > max_abs:
                max_abs = dev
                t_at = t
        rel = max_abs / denom
        report_fields[name] = FieldDrift(
            initial=initial, max_abs_dev=max_abs, max_rel_drift=rel, t_at_max=float(t_at)
        )
        passed = passed and rel <= tol
    return DriftReport(fields=report_fields, tol=tol, passed=passed)


def trajectory_csv(spec, traj: Trajectory, fields=()) -> str:
    """CSV text: t, x, y and optional field columns at every sample."""
    fields = list(fields)
    n = traj.xs.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + fields
    order = integrals.field_order(spec, fields) if fields else 0
    lines = [",".join(header)]
    for t, x, y in traj.samples:
        row = [t, *x, *y]
        if fields:
            ev = PointEvaluation(spec, PhasePoint(x, y), order=order)
            vals = integrals.evaluate_fields(spec, fields, None, ev=ev)
            row += [vals[name] for name in fields]
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"
