"""Descriptor engines: component-power sums, arc length and vorticity deviation.

Values are accumulated along RK4 trajectories over [t0 - tau, t0 + tau]
(one-sided [t0, t0 + tau] for the vorticity deviation), evaluated at single
points, over full grids, or incrementally in the horizon for time averages.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import systems
from .integrator import IntegratorConfig, cumulative_quadrature, quadrature_batch
from .systems import VectorFieldSpec

__all__ = [
    "LDConfig",
    "GridSpec",
    "ScalarField",
    "ConvergenceSeries",
    "PSelection",
    "descriptor_at",
    "descriptor_batch",
    "compute_field",
    "time_average",
    "select_p",
    "partial_derivative_field",
]

KINDS = ("mp", "arclength", "lavd")


@dataclass(frozen=True)
class LDConfig:
    """Descriptor kind, exponent, horizon, base time and integrator settings."""

    kind: str
    tau: float
    p: Optional[float] = None
    t0: float = 0.0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (self.tau > 0):
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.kind == "mp":
            if self.p is None or not (0.0 < self.p <= 1.0):
                raise ValueError(f"mp requires p in (0, 1], got {self.p}")
        elif self.p is not None:
            raise ValueError(f"p is only meaningful for kind 'mp'")


def _integrand(spec: VectorFieldSpec, cfg: LDConfig) -> Callable:
    if cfg.kind == "mp":
        p = cfg.p

        def g(x, t, v):
            return np.sum(np.abs(v) ** p, axis=-1)
        return g
    if cfg.kind == "arclength":
        def g(x, t, v):
            return np.sqrt(np.sum(v * v, axis=-1))
        return g
    # lavd: |vorticity along trajectory - spatial mean vorticity|
    if spec.dim != 2:
        raise ValueError("lavd is only defined for 2D builtins with analytic vorticity")

    def g(x, t, v):
        return np.abs(systems.vorticity(spec, x, t) - systems.mean_vorticity(spec, t))
    return g


def descriptor_batch(spec: VectorFieldSpec, x0, cfg: LDConfig):
    """Descriptor at a batch of points; returns (values, partial, reached)."""
    two_sided = cfg.kind != "lavd"
    return quadrature_batch(spec, x0, cfg.t0, cfg.tau, cfg.integrator,
                            _integrand(spec, cfg), two_sided=two_sided)


def descriptor_at(spec: VectorFieldSpec, x0, cfg: LDConfig,
                  return_flag: bool = False):
    """Descriptor value at one point (optionally with its truncation flag)."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.dim,):
        raise ValueError(f"point must have shape ({spec.dim},)")
    vals, partial, _ = descriptor_batch(spec, x0[None, :], cfg)
    if return_flag:
        return float(vals[0]), bool(partial[0])
    return float(vals[0])


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Box of initial conditions, with optional fixed axes for plane slices."""

    lo: tuple
    hi: tuple
    resolution: tuple
    slices: tuple = ()           # ((axis, value), ...)

    def __post_init__(self):
        lo, hi, res = map(tuple, (self.lo, self.hi, self.resolution))
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))
        object.__setattr__(self, "resolution", tuple(int(v) for v in res))
        object.__setattr__(self, "slices",
                           tuple((int(a), float(v)) for a, v in self.slices))
        if not (len(self.lo) == len(self.hi) == len(self.resolution)):
            raise ValueError("lo, hi and resolution must have equal length")
        fixed = {a for a, _ in self.slices}
        if any(a < 0 or a >= len(self.lo) for a in fixed):
            raise ValueError("slice axis out of range")
        for i in range(len(self.lo)):
            if i in fixed:
                continue
            if self.resolution[i] >= 2 and not self.lo[i] < self.hi[i]:
                raise ValueError(f"axis {i}: lo must be < hi")
            if self.resolution[i] == 1 and self.lo[i] != self.hi[i]:
                raise ValueError(f"axis {i}: single-node axis needs lo == hi")
            if self.resolution[i] < 1:
                raise ValueError(f"axis {i}: resolution must be >= 1")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def free_axes(self) -> tuple:
        fixed = {a for a, _ in self.slices}
        return tuple(i for i in range(self.dim) if i not in fixed)

    @property
    def shape(self) -> tuple:
        return tuple(self.resolution[i] for i in self.free_axes)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    def axis_coords(self, axis: int) -> np.ndarray:
        if self.resolution[axis] == 1:
            return np.array([self.lo[axis]])
        return np.linspace(self.lo[axis], self.hi[axis], self.resolution[axis])

    def spacing(self, axis: int) -> float:
        if self.resolution[axis] == 1:
            return 0.0
        return (self.hi[axis] - self.lo[axis]) / (self.resolution[axis] - 1)

    def nodes(self) -> np.ndarray:
        """All nodes in row-major order over the free axes, shape (N, dim)."""
        free = self.free_axes
        coords = [self.axis_coords(i) for i in free]
        mesh = np.meshgrid(*coords, indexing="ij")
        pts = np.empty(self.shape + (self.dim,))
        for a, val in self.slices:
            pts[..., a] = val
        for k, i in enumerate(free):
            pts[..., i] = mesh[k]
        return pts.reshape(-1, self.dim)


@dataclass
class ScalarField:
    """Grid of descriptor values with per-node truncation flags."""

    grid: GridSpec
    values: np.ndarray           # (N,) row-major over free axes
    partial: np.ndarray          # (N,) bool
    meta: dict

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)


def field_meta(spec: VectorFieldSpec, cfg: LDConfig) -> dict:
    return {
        "system_id": spec.system_id,
        "params": dict(spec.params),
        "kind": cfg.kind,
        "p": cfg.p,
        "tau": cfg.tau,
        "t0": cfg.t0,
        "h": cfg.integrator.h,
        "max_steps": cfg.integrator.max_steps,
        "safety_box": cfg.integrator.safety_box,
    }


_CHUNK = 16384


def _field_chunk(spec: VectorFieldSpec, cfg: LDConfig, pts: np.ndarray):
    vals, partial, _ = descriptor_batch(spec, pts, cfg)
    return vals, partial


def compute_field(spec: VectorFieldSpec, grid: GridSpec, cfg: LDConfig,
                  workers: int = 1) -> ScalarField:
    """Descriptor evaluated at every grid node.

    The node set is split into fixed-size chunks, each integrated as a batch;
    chunk boundaries do not depend on the worker count and every node is
    independent, so results are bit-identical for any number of workers.
    """
    if grid.dim != spec.dim:
        raise ValueError(f"grid dimension {grid.dim} does not match system "
                         f"dimension {spec.dim}")
    pts = grid.nodes()
    chunks = [pts[i:i + _CHUNK] for i in range(0, len(pts), _CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_field_chunk, itertools.repeat(spec),
                                    itertools.repeat(cfg), chunks))
    else:
        results = [_field_chunk(spec, cfg, c) for c in chunks]
    values = np.concatenate([r[0] for r in results])
    partial = np.concatenate([r[1] for r in results])
    return ScalarField(grid, values, partial, field_meta(spec, cfg))


# ---------------------------------------------------------------------------
# time averages
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceSeries:
    """Normalized descriptor averages against the horizon, with a verdict.

    Produced raw by time_average (verdict fields unset) and completed by
    analysis.assess_convergence.
    """

    x0: np.ndarray
    tau_samples: np.ndarray
    averages: np.ndarray
    partial: np.ndarray
    window: Optional[float] = None
    eps: Optional[float] = None
    converged: Optional[bool] = None
    tau_converged: Optional[float] = None
    meta: dict = field(default_factory=dict)


def time_average(spec: VectorFieldSpec, x0, cfg: LDConfig,
                 tau_samples: Sequence[float]) -> ConvergenceSeries:
    """Descriptor/(2 tau) at each horizon sample, from one long sweep per direction.

    Samples are rounded to the nearest integrator node; the rounded values are
    recorded in the returned series.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.dim,):
        raise ValueError(f"point must have shape ({spec.dim},)")
    tau_actual, totals, partial = cumulative_quadrature(
        spec, x0[None, :], cfg.t0, tau_samples, cfg.integrator,
        _integrand(spec, cfg), two_sided=cfg.kind != "lavd")
    averages = totals[0] / (2.0 * tau_actual)
    return ConvergenceSeries(x0, tau_actual, averages, partial[0],
                             meta=field_meta(spec, cfg))


class PSelection(NamedTuple):
    p: float
    clamped: bool


def select_p(lam: float, mu: float, tau: float) -> PSelection:
    """Exponent balancing the two saddle terms: 1/(tau (lam - mu)), clamped to (0, 1]."""
    if lam == mu:
        raise ValueError("p selection rule is undefined for lam == mu")
    if not (tau > 0):
        raise ValueError("tau must be positive")
    raw = 1.0 / (tau * (lam - mu))
    if raw <= 0:
        raise ValueError(f"selection rule gives nonpositive p={raw}; "
                         "requires lam > mu")
    if raw >= 1.0:
        return PSelection(1.0, True)
    return PSelection(raw, False)


def partial_derivative_field(make_field: Callable[[GridSpec, LDConfig], ScalarField],
                             grid: GridSpec, cfg: LDConfig, axis: int) -> ScalarField:
    """Finite-difference derivative of a descriptor field along one free axis.

    Central differences inside, one-sided at the boundaries.  ``axis`` indexes
    the free axes of the grid.
    """
    base = make_field(grid, cfg)
    shape = grid.shape
    if axis < 0 or axis >= len(shape):
        raise ValueError(f"axis {axis} out of range for field of rank {len(shape)}")
    if shape[axis] < 3:
        raise ValueError("derivative needs resolution >= 3 along the axis")
    spacing = grid.spacing(grid.free_axes[axis])
    deriv = np.gradient(base.values.reshape(shape), spacing, axis=axis)
    # a partial node taints every stencil that reads it
    part = base.partial.reshape(shape)
    smear = part.copy()
    sl_lo = [slice(None)] * len(shape)
    sl_hi = [slice(None)] * len(shape)
    sl_lo[axis] = slice(None, -1)
    sl_hi[axis] = slice(1, None)
    smear[tuple(sl_lo)] |= part[tuple(sl_hi)]
    smear[tuple(sl_hi)] |= part[tuple(sl_lo)]
    meta = dict(base.meta)
    meta["derivative_axis"] = axis
    return ScalarField(grid, deriv.reshape(-1), smear.reshape(-1), meta)
