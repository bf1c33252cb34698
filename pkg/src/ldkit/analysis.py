"""Singular-feature detection along transects and convergence-gated invariant sets.

A descriptor is non-differentiable across a stable or unstable manifold; at
finite resolution that shows up as a jump between the one-sided difference
quotients of a transect, or as a one-sided slope far above the transect's
typical scale.  Converged trajectory time averages, in turn, label invariant
sets through their level sets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .descriptor import (ConvergenceSeries, GridSpec, LDConfig, ScalarField,
                         descriptor_batch, field_meta)
from .integrator import IntegratorConfig, integrate
from .systems import VectorFieldSpec

__all__ = [
    "TransectProfile",
    "SingularFeatureReport",
    "ConvergenceSeries",
    "InvarianceReport",
    "transect",
    "detect_singularities",
    "assess_convergence",
    "invariant_level_set",
    "invariance_check",
]


@dataclass
class TransectProfile:
    """Descriptor sampled along a line, with one-sided difference quotients."""

    anchor: np.ndarray
    direction: np.ndarray
    offsets: np.ndarray          # (n,) uniform, ascending
    values: np.ndarray           # (n,)
    left_slopes: np.ndarray      # (n-2,) interior points only
    right_slopes: np.ndarray     # (n-2,)
    partial: np.ndarray          # (n,) bool
    meta: dict = field(default_factory=dict)

    @property
    def spacing(self) -> float:
        return float(self.offsets[1] - self.offsets[0])


def transect(spec: VectorFieldSpec, cfg: LDConfig, anchor, direction,
             half_width: float, n: int) -> TransectProfile:
    """Sample the descriptor at n uniform offsets along a line through anchor."""
    if n < 5 or n % 2 == 0:
        raise ValueError(f"n must be odd and >= 5, got {n}")
    if not (half_width > 0):
        raise ValueError("half_width must be positive")
    anchor = np.asarray(anchor, dtype=float)
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    direction = direction / norm
    offsets = np.linspace(-half_width, half_width, n)
    pts = anchor[None, :] + offsets[:, None] * direction[None, :]
    values, partial, _ = descriptor_batch(spec, pts, cfg)
    hs = offsets[1] - offsets[0]
    left = (values[1:-1] - values[:-2]) / hs
    right = (values[2:] - values[1:-1]) / hs
    meta = field_meta(spec, cfg)
    return TransectProfile(anchor, direction, offsets, values, left, right,
                           partial, meta)


@dataclass
class SingularFeatureReport:
    """Offsets flagged as singular, one per contiguous run of flagged samples."""

    flagged_offsets: list
    jump_ratios: list            # peak ratio per flagged feature
    threshold: float
    raw_offsets: list            # every sample exceeding the threshold
    degenerate: bool = False


def detect_singularities(profile: TransectProfile, kappa: float) -> SingularFeatureReport:
    """Flag interior samples whose slope jump (or magnitude, for p < 1) exceeds
    kappa times the transect's median absolute one-sided slope.

    Contiguous flagged samples are merged into one feature, reported at the
    sample with the largest jump.
    """
    if not (kappa > 1):
        raise ValueError("kappa must be > 1")
    left, right = profile.left_slopes, profile.right_slopes
    interval_slopes = np.diff(profile.values) / profile.spacing
    median_abs = float(np.median(np.abs(interval_slopes)))
    if median_abs == 0.0:
        return SingularFeatureReport([], [], kappa, [], degenerate=True)

    # slopes that touch a truncated sample are unreliable
    bad = profile.partial[:-2] | profile.partial[1:-1] | profile.partial[2:]
    jumps = np.abs(right - left)
    ratio = jumps / median_abs
    flagged = (ratio > kappa) & ~bad
    p = profile.meta.get("p")
    if profile.meta.get("kind") == "mp" and p is not None and p < 1.0:
        peak = np.maximum(np.abs(left), np.abs(right)) / median_abs
        flagged |= (peak > kappa) & ~bad
        ratio = np.maximum(ratio, peak)

    interior_offsets = profile.offsets[1:-1]
    raw = interior_offsets[flagged].tolist()
    features, peaks = [], []
    i = 0
    while i < len(flagged):
        if flagged[i]:
            j = i
            while j + 1 < len(flagged) and flagged[j + 1]:
                j += 1
            k = i + int(np.argmax(ratio[i:j + 1]))
            features.append(float(interior_offsets[k]))
            peaks.append(float(ratio[k]))
            i = j + 1
        else:
            i += 1
    return SingularFeatureReport(features, peaks, kappa, raw)


def assess_convergence(series: ConvergenceSeries, w: float, eps: float) -> ConvergenceSeries:
    """Convergence verdict from the oscillation of trailing windows.

    The relative oscillation of a window is the RMS deviation of its averages
    from the window mean, divided by the absolute window mean.  The series is
    converged when the final full window oscillates below eps; tau_converged
    is the earliest horizon from which every later window does too.
    """
    taus, avgs = np.asarray(series.tau_samples), np.asarray(series.averages)
    if not (w > 0) or not (eps > 0):
        raise ValueError("window and eps must be positive")
    full = taus - w >= taus[0]
    if not np.any(full):
        raise ValueError("need at least one full window of samples")
    ends = np.nonzero(full)[0]
    osc = np.empty(len(ends))
    for k, i in enumerate(ends):
        seg = avgs[(taus > taus[i] - w) & (taus <= taus[i])]
        mean = abs(seg.mean())
        osc[k] = np.inf if mean == 0 and seg.std() > 0 else \
            (0.0 if mean == 0 else seg.std() / mean)
    ok = osc <= eps
    converged = bool(ok[-1])
    tau_conv = None
    if converged:
        idx = len(ok) - 1
        while idx > 0 and ok[idx - 1]:
            idx -= 1
        tau_conv = float(taus[ends[idx]])
    return ConvergenceSeries(series.x0, taus, avgs, series.partial,
                             window=w, eps=eps, converged=converged,
                             tau_converged=tau_conv, meta=dict(series.meta))


def invariant_level_set(field_: ScalarField, level: float, tol: float) -> list:
    """Connected components of {|value - level| <= tol} under face adjacency.

    Returns a list of flat node-index arrays (row-major over the free axes).
    """
    shape = field_.grid.shape
    mask = (np.abs(field_.values - level) <= tol).reshape(shape)
    structure = ndimage.generate_binary_structure(len(shape), 1)
    labels, n = ndimage.label(mask, structure=structure)
    flat = labels.reshape(-1)
    return [np.nonzero(flat == k)[0] for k in range(1, n + 1)]


@dataclass
class InvarianceReport:
    deviation: float             # max |field(x(t)) - field(seed)| along the trajectory
    seed_value: float
    ok: bool
    left_grid: bool              # some trajectory points fell outside the grid box
    fraction_inside: float


def invariance_check(spec: VectorFieldSpec, seed, t_span: float,
                     field_: ScalarField, tol: float,
                     cfg: Optional[IntegratorConfig] = None,
                     wrap: Optional[dict] = None) -> InvarianceReport:
    """Maximum drift of the interpolated field value along a trajectory.

    A small deviation certifies that the level set through the seed is
    numerically invariant.  ``wrap`` maps axis index -> period for fields on
    periodic domains.
    """
    seed = np.asarray(seed, dtype=float)
    grid = field_.grid
    if grid.dim != spec.dim:
        raise ValueError("field grid dimension does not match system dimension")
    if cfg is None:
        cfg = IntegratorConfig(h=field_.meta.get("h", 0.1))
    free = grid.free_axes
    coords = [grid.axis_coords(i) for i in free]
    interp = RegularGridInterpolator(coords, field_.reshaped(),
                                     bounds_error=False, fill_value=np.nan)

    traj = integrate(spec, seed, 0.0, t_span, cfg)
    pts = traj.states[:, list(free)]
    if wrap:
        for k, i in enumerate(free):
            if i in wrap:
                period = wrap[i]
                pts[:, k] = coords[k][0] + np.mod(pts[:, k] - coords[k][0], period)
    vals = interp(pts)
    seed_pt = seed[list(free)].copy()
    if wrap:
        for k, i in enumerate(free):
            if i in wrap:
                seed_pt[k] = coords[k][0] + np.mod(seed_pt[k] - coords[k][0], wrap[i])
    seed_val = float(interp(seed_pt[None, :])[0])
    inside = np.isfinite(vals)
    if not np.any(inside) or not np.isfinite(seed_val):
        raise ValueError("seed or entire trajectory lies outside the field grid")
    deviation = float(np.max(np.abs(vals[inside] - seed_val)))
    return InvarianceReport(deviation, seed_val, deviation <= tol,
                            bool(np.any(~inside)), float(np.mean(inside)))
