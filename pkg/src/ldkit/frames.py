"""Uniformly rotating observer frames for planar systems.

Frame coordinates are q = R(sense * omega * t)^T x, where R is the
counterclockwise rotation matrix.  Transforming a vector field into the frame
adds the usual apparent rotation term; a few builtin combinations collapse to
other builtins with known closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .systems import VectorFieldSpec, get_system, make_spec

__all__ = ["RotatingFrame", "transform_point", "transform_field"]


@dataclass(frozen=True)
class RotatingFrame:
    """Angular speed and sense (+1 counterclockwise, -1 clockwise)."""

    omega: float
    sense: int = 1

    def __post_init__(self):
        if not math.isfinite(self.omega) or self.omega < 0:
            raise ValueError(f"omega must be finite and >= 0, got {self.omega}")
        if self.sense not in (1, -1):
            raise ValueError(f"sense must be +1 or -1, got {self.sense}")

    def angle(self, t: float) -> float:
        return self.sense * self.omega * t


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def transform_point(frame: RotatingFrame, x, t: float,
                    inverse: bool = False) -> np.ndarray:
    """Map lab coordinates to frame coordinates at time t (or back)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("rotating frames act on planar points")
    r = _rot(frame.angle(t))
    # x @ r applies r^T rowwise; x @ r.T applies r
    return x @ r.T if inverse else x @ r


def transform_field(spec: VectorFieldSpec, frame: RotatingFrame) -> VectorFieldSpec:
    """Spec of the same dynamics expressed in the rotating frame.

    Recognized simplifications:
      * omega = 0 leaves the spec untouched,
      * rest observed from a unit counterclockwise frame is the harmonic
        oscillator (pure apparent rotation),
      * the oscillating saddle co-rotated with its own pattern (clockwise
        sense, matching omega) becomes the stationary diagonal saddle.

    Any other 2D builtin yields a composed ``rotated:<id>`` spec carrying the
    frame and the base parameters.
    """
    if spec.dim != 2:
        raise ValueError("rotating frames are only defined for planar systems")
    if spec.system_id.startswith("rotated:"):
        raise ValueError("spec is already frame-composed; transform the base instead")
    get_system(spec.system_id)  # validate id
    if frame.omega == 0.0:
        return spec
    if (spec.system_id == "rest" and frame.omega == 1.0 and frame.sense == 1):
        return make_spec("harmonic-oscillator")
    if (spec.system_id == "rotating-saddle" and frame.sense == -1
            and frame.omega == spec.params["omega"]):
        return make_spec("rotated-saddle")
    params = {"omega": float(frame.omega), "sense": float(frame.sense)}
    params.update({f"base.{k}": float(v) for k, v in spec.params.items()})
    return VectorFieldSpec(f"rotated:{spec.system_id}", params, 2, False)
