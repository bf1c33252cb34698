"""Fixed-step RK4 propagation and trapezoid accumulation of descriptor integrands.

The engine is batched: an initial-condition array of shape (m, dim) is stepped
as a whole.  Every node is numerically independent, so results are identical
for any batching or scheduling of the nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import BlowUpError
from .systems import VectorFieldSpec, get_system

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "QuadResult",
    "integrate",
    "integrate_with_quadrature",
    "quadrature_batch",
    "cumulative_quadrature",
]


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed step size, a step-count guard and a blow-up safety box.

    The step is adjusted downward so the horizon is an exact integer number of
    steps.  A trajectory coordinate leaving [-safety_box, safety_box] freezes
    that node and flags its result partial instead of aborting the sweep.
    """

    h: float = 0.1
    max_steps: int = 10_000_000
    safety_box: float = 1e6

    def __post_init__(self):
        if not (self.h > 0):
            raise ValueError(f"step must be positive, got {self.h}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def steps_for(self, span: float) -> tuple[int, float]:
        """Number of steps and effective (possibly reduced) step for a horizon."""
        if span == 0.0:
            return 0, self.h
        n = max(1, math.ceil(span / self.h - 1e-12))
        if n > self.max_steps:
            raise ValueError(f"horizon {span} needs {n} steps of {self.h}, "
                             f"exceeding max_steps={self.max_steps}")
        return n, span / n


@dataclass
class Trajectory:
    times: np.ndarray            # (n,) strictly monotone
    states: np.ndarray           # (n, dim)
    spec: VectorFieldSpec


class QuadResult(NamedTuple):
    value: float
    partial: bool
    reached: float               # horizon actually covered (== tau when complete)


def _velocity(spec: VectorFieldSpec):
    sys = get_system(spec.system_id)
    params = spec.params
    fn = sys.velocity
    return lambda x, t: fn(params, x, t)


def _rk4_step(f, x, t, h):
    k1 = f(x, t)
    k2 = f(x + (0.5 * h) * k1, t + 0.5 * h)
    k3 = f(x + (0.5 * h) * k2, t + 0.5 * h)
    k4 = f(x + h * k3, t + h)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(spec: VectorFieldSpec, x0, t0: float, t1: float,
              cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """RK4 trajectory from t0 to t1 (backward when t1 < t0).

    Raises BlowUpError on a non-finite state, carrying the last finite time.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.dim,):
        raise ValueError(f"initial condition must have shape ({spec.dim},)")
    if t1 == t0:
        return Trajectory(np.array([t0]), x0[None, :].copy(), spec)

    f = _velocity(spec)
    n, h_abs = cfg.steps_for(abs(t1 - t0))
    h = h_abs if t1 > t0 else -h_abs
    times = t0 + h * np.arange(n + 1)
    times[-1] = t1
    states = np.empty((n + 1, spec.dim))
    states[0] = x0
    x = x0[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            x = _rk4_step(f, x, times[k], h)
            if not np.all(np.isfinite(x)):
                raise BlowUpError(float(times[k]))
            states[k + 1] = x[0]
    return Trajectory(times, states, spec)


def _sweep(spec: VectorFieldSpec, x0: np.ndarray, t0: float, tau: float,
           cfg: IntegratorConfig, integrand: Callable,
           direction: int, record_steps: Optional[np.ndarray] = None):
    """One-directional trapezoid accumulation on the RK4 time grid.

    Returns (acc, active, reached[, recorded]) where recorded stacks the
    cumulative integral at the requested step indices.
    """
    m = x0.shape[0]
    f = _velocity(spec)
    n, h_abs = cfg.steps_for(tau)
    h = h_abs * direction
    box = cfg.safety_box

    x = np.array(x0, dtype=float)
    acc = np.zeros(m)
    active = np.ones(m, dtype=bool)
    reached = np.full(m, tau)
    v = f(x, t0)
    g_prev = integrand(x, t0, v)

    recorded = None
    rec_idx = 0
    if record_steps is not None:
        recorded = np.zeros((len(record_steps), m))
        rec_active = np.zeros((len(record_steps), m), dtype=bool)

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            t_here = t0 + k * h
            t_next = t0 + (k + 1) * h
            x_new = _rk4_step(f, x, t_here, h)
            ok = np.all(np.isfinite(x_new) & (np.abs(x_new) <= box), axis=-1)
            newly_dead = active & ~ok
            if np.any(newly_dead):
                reached[newly_dead] = k * h_abs
                active &= ok
            g_new = integrand(x_new, t_next, f(x_new, t_next))
            step_add = (0.5 * h_abs) * (g_prev + g_new)
            acc = np.where(active, acc + step_add, acc)
            x = np.where(active[:, None], x_new, x)
            g_prev = np.where(active, g_new, g_prev)
            if recorded is not None and rec_idx < len(record_steps) \
                    and record_steps[rec_idx] == k + 1:
                recorded[rec_idx] = acc
                rec_active[rec_idx] = active
                rec_idx += 1

    if recorded is not None:
        return acc, active, reached, recorded, rec_active
    return acc, active, reached


def quadrature_batch(spec: VectorFieldSpec, x0, t0: float, tau: float,
                     cfg: IntegratorConfig, integrand: Callable,
                     two_sided: bool = True):
    """Trapezoid integral of ``integrand(x, t, v)`` along RK4 trajectories.

    Two-sided sweeps cover [t0 - tau, t0 + tau]; one-sided cover [t0, t0 + tau].
    Returns (values, partial, reached) arrays over the batch.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0.0:
        m = x0.shape[0]
        return np.zeros(m), np.zeros(m, dtype=bool), np.zeros(m)

    acc_f, act_f, reach_f = _sweep(spec, x0, t0, tau, cfg, integrand, +1)
    if not two_sided:
        return acc_f, ~act_f, reach_f
    acc_b, act_b, reach_b = _sweep(spec, x0, t0, tau, cfg, integrand, -1)
    return acc_f + acc_b, ~(act_f & act_b), np.minimum(reach_f, reach_b)


def integrate_with_quadrature(spec: VectorFieldSpec, x0, t0: float, tau: float,
                              cfg: IntegratorConfig, integrand: Callable,
                              two_sided: bool = True) -> QuadResult:
    """Single-point forward + backward quadrature over [t0 - tau, t0 + tau]."""
    vals, partial, reached = quadrature_batch(
        spec, np.asarray(x0, dtype=float)[None, :], t0, tau, cfg, integrand,
        two_sided=two_sided)
    return QuadResult(float(vals[0]), bool(partial[0]), float(reached[0]))


def cumulative_quadrature(spec: VectorFieldSpec, x0, t0: float,
                          tau_samples: Sequence[float], cfg: IntegratorConfig,
                          integrand: Callable, two_sided: bool = True):
    """Cumulative integral at several horizons from one long sweep per direction.

    Samples are rounded to the nearest node of the integrator grid built for
    the largest horizon.  Returns (tau_actual, totals (m, k), partial (m, k)).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    taus = np.asarray(tau_samples, dtype=float)
    if taus.size == 0 or np.any(np.diff(taus) <= 0) or taus[0] <= 0:
        raise ValueError("tau samples must be ascending and positive")
    tau_max = float(taus[-1])
    n, h_abs = cfg.steps_for(tau_max)
    steps = np.maximum(1, np.rint(taus / h_abs).astype(int))
    steps = np.minimum(steps, n)
    rec_steps = np.unique(steps)

    _, _, _, rec_f, act_f = _sweep(spec, x0, t0, tau_max, cfg, integrand, +1,
                                   record_steps=rec_steps)
    if two_sided:
        _, _, _, rec_b, act_b = _sweep(spec, x0, t0, tau_max, cfg, integrand, -1,
                                       record_steps=rec_steps)
    pick = np.searchsorted(rec_steps, steps)
    totals = rec_f[pick]
    ok = act_f[pick]
    if two_sided:
        totals = totals + rec_b[pick]
        ok = ok & act_b[pick]
    tau_actual = steps * h_abs
    # (k, m) -> (m, k)
    return tau_actual, totals.T.copy(), (~ok).T.copy()
