"""Benchmark vector fields with analytic solutions and closed-form descriptor oracles.

Every builtin is addressable by a string id.  Velocity evaluations are
vectorized: ``x`` may carry arbitrary leading batch dimensions, the last axis
is the phase-space dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.integrate import quad

from .errors import NoExactSolutionError, OracleNotFoundError, UnknownSystemError

__all__ = [
    "VectorFieldSpec",
    "AnalyticOracle",
    "make_spec",
    "list_systems",
    "evaluate_field",
    "exact_solution",
    "oracle_descriptor",
    "oracle_average_limit",
    "get_system",
    "has_exact_solution",
    "vorticity",
    "mean_vorticity",
    "conserved_quantity",
]


@dataclass(frozen=True)
class VectorFieldSpec:
    """Identity of a dynamical system: builtin id plus named parameters."""

    system_id: str
    params: Mapping[str, float] = field(default_factory=dict)
    dim: int = 2
    autonomous: bool = True


@dataclass(frozen=True)
class AnalyticOracle:
    """Closed-form reference value attached to a (system, descriptor) pair.

    kind is one of ``descriptor_closed_form``, ``exact_solution``,
    ``average_limit``.  ``eval`` is a pure function of (initial point, config).
    """

    kind: str
    eval: Callable[[np.ndarray, object], float]


def _rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------------------
# forcing choices for the nonautonomous saddles: both positive and C^1
# ---------------------------------------------------------------------------

def _forcing(params, t):
    choice = int(params.get("forcing", 1))
    if choice == 1:
        return 2.0 + np.sin(t)
    if choice == 2:
        return 2.0 - 1.0 / (1.0 + t * t)  # == 1 + t^2/(1+t^2)
    raise ValueError(f"forcing selector must be 1 or 2, got {choice}")


def _forcing_antiderivative(params, t):
    choice = int(params.get("forcing", 1))
    if choice == 1:
        return 2.0 * t + 1.0 - np.cos(t)
    if choice == 2:
        return 2.0 * t - np.arctan(t)
    raise ValueError(f"forcing selector must be 1 or 2, got {choice}")


# ---------------------------------------------------------------------------
# system table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _System:
    system_id: str
    dim: int
    autonomous: bool
    defaults: Mapping[str, float]
    velocity: Callable
    exact: Optional[Callable] = None
    vorticity: Optional[Callable] = None          # (params, x, t) -> array
    mean_vorticity: Optional[Callable] = None     # (params, t) -> float
    conserved: Optional[Callable] = None          # (params, x) -> array
    validate: Optional[Callable] = None


def _v_linear_saddle(p, x, t):
    lam = p["lambda"]
    return np.stack([lam * x[..., 0], -lam * x[..., 1]], axis=-1)


def _x_linear_saddle(p, x0, t0, t):
    lam = p["lambda"]
    d = t - t0
    return np.stack([x0[..., 0] * np.exp(lam * d), x0[..., 1] * np.exp(-lam * d)], axis=-1)


def _v_rotated_saddle(p, x, t):
    return np.stack([x[..., 1], x[..., 0]], axis=-1)


def _x_rotated_saddle(p, x0, t0, t):
    d = t - t0
    ch, sh = np.cosh(d), np.sinh(d)
    return np.stack([x0[..., 0] * ch + x0[..., 1] * sh,
                     x0[..., 0] * sh + x0[..., 1] * ch], axis=-1)


def _v_nonlinear_saddle(p, x, t):
    # Hamiltonian H = xy + x^2 y^2: hyperbolic at the origin
    u, w = x[..., 0], x[..., 1]
    return np.stack([u + 2.0 * u * u * w, -w - 2.0 * u * w * w], axis=-1)


def _v_nonauto_linear(p, x, t):
    f = _forcing(p, t)
    return np.stack([f * x[..., 0], -f * x[..., 1]], axis=-1)


def _x_nonauto_linear(p, x0, t0, t):
    df = _forcing_antiderivative(p, t) - _forcing_antiderivative(p, t0)
    return np.stack([x0[..., 0] * np.exp(df), x0[..., 1] * np.exp(-df)], axis=-1)


def _v_nonauto_nonlinear(p, x, t):
    # H(t,x,y) = f(t) x y + x^2 y: quadratic perturbation vanishing at the origin
    f = _forcing(p, t)
    u, w = x[..., 0], x[..., 1]
    return np.stack([f * u + u * u, -f * w - 2.0 * u * w], axis=-1)


def _v_nonham_saddle(p, x, t):
    return np.stack([p["lambda"] * x[..., 0], -p["mu"] * x[..., 1]], axis=-1)


def _x_nonham_saddle(p, x0, t0, t):
    d = t - t0
    return np.stack([x0[..., 0] * np.exp(p["lambda"] * d),
                     x0[..., 1] * np.exp(-p["mu"] * d)], axis=-1)


def _v_global_attractor(p, x, t):
    return -x


def _x_global_attractor(p, x0, t0, t):
    return x0 * np.exp(-(t - t0))


def _v_harmonic(p, x, t):
    return np.stack([x[..., 1], -x[..., 0]], axis=-1)


def _x_harmonic(p, x0, t0, t):
    d = t - t0
    c, s = np.cos(d), np.sin(d)
    return np.stack([x0[..., 0] * c + x0[..., 1] * s,
                     -x0[..., 0] * s + x0[..., 1] * c], axis=-1)


def _v_rotating_saddle(p, x, t):
    w = p["omega"]
    s2, c2 = np.sin(2.0 * w * t), np.cos(2.0 * w * t)
    u, v = x[..., 0], x[..., 1]
    return np.stack([s2 * u + (w + c2) * v, (-w + c2) * u - s2 * v], axis=-1)


def _x_rotating_saddle(p, x0, t0, t):
    # conjugate to the stationary saddle xdot=y, ydot=x through x_rot = R(w t) x
    w = p["omega"]
    q0 = x0 @ _rot2(w * t0).T
    q = _x_rotated_saddle(p, q0, t0, t)
    return q @ _rot2(w * t)  # == q @ R(wt)^T.T, i.e. R(wt)^T applied to q


def _v_rest(p, x, t):
    return np.zeros_like(x)


def _x_rest(p, x0, t0, t):
    return x0 + 0.0


def _v_abc(p, x, t):
    a, b, c = p["A"], p["B"], p["C"]
    u, v, w = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([a * np.sin(w) + c * np.cos(v),
                     b * np.sin(u) + a * np.cos(w),
                     c * np.sin(v) + b * np.cos(u)], axis=-1)


def _const_vort(value):
    def vort(p, x, t):
        return np.full(x.shape[:-1], value(p) if callable(value) else value)
    return vort


def _require_positive(*names):
    def check(p):
        for n in names:
            if not (p[n] > 0):
                raise ValueError(f"parameter {n} must be > 0, got {p[n]}")
    return check


def _check_nonham(p):
    _require_positive("lambda", "mu")(p)
    if p["lambda"] == p["mu"]:
        raise ValueError("nonham-saddle requires lambda != mu")


def _check_forcing(p):
    if int(p["forcing"]) not in (1, 2):
        raise ValueError("forcing selector must be 1 or 2")


_REGISTRY: dict[str, _System] = {}


def _register(sys: _System):
    _REGISTRY[sys.system_id] = sys


_register(_System("linear-saddle", 2, True, {"lambda": 1.0}, _v_linear_saddle,
                  exact=_x_linear_saddle, vorticity=_const_vort(0.0),
                  mean_vorticity=lambda p, t: 0.0,
                  conserved=lambda p, x: x[..., 0] * x[..., 1],
                  validate=_require_positive("lambda")))
_register(_System("rotated-saddle", 2, True, {}, _v_rotated_saddle,
                  exact=_x_rotated_saddle, vorticity=_const_vort(0.0),
                  mean_vorticity=lambda p, t: 0.0,
                  conserved=lambda p, x: 0.5 * (x[..., 1] ** 2 - x[..., 0] ** 2)))
_register(_System("nonlinear-saddle", 2, True, {}, _v_nonlinear_saddle,
                  conserved=lambda p, x: x[..., 0] * x[..., 1] + (x[..., 0] * x[..., 1]) ** 2))
_register(_System("nonauto-linear-saddle", 2, False, {"forcing": 1.0}, _v_nonauto_linear,
                  exact=_x_nonauto_linear, vorticity=_const_vort(0.0),
                  mean_vorticity=lambda p, t: 0.0, validate=_check_forcing))
_register(_System("nonauto-nonlinear-saddle", 2, False, {"forcing": 1.0},
                  _v_nonauto_nonlinear, validate=_check_forcing))
_register(_System("nonham-saddle", 2, True, {"lambda": 2.0, "mu": 1.0}, _v_nonham_saddle,
                  exact=_x_nonham_saddle, vorticity=_const_vort(0.0),
                  mean_vorticity=lambda p, t: 0.0, validate=_check_nonham))
_register(_System("global-attractor", 2, True, {}, _v_global_attractor,
                  exact=_x_global_attractor, vorticity=_const_vort(0.0),
                  mean_vorticity=lambda p, t: 0.0))
_register(_System("harmonic-oscillator", 2, True, {}, _v_harmonic,
                  exact=_x_harmonic, vorticity=_const_vort(-2.0),
                  mean_vorticity=lambda p, t: -2.0,
                  conserved=lambda p, x: np.hypot(x[..., 0], x[..., 1])))
_register(_System("rotating-saddle", 2, False, {"omega": 2.0}, _v_rotating_saddle,
                  exact=_x_rotating_saddle,
                  vorticity=_const_vort(lambda p: -2.0 * p["omega"]),
                  mean_vorticity=lambda p, t: -2.0 * p["omega"]))
_register(_System("rest", 2, True, {}, _v_rest, exact=_x_rest,
                  vorticity=_const_vort(0.0), mean_vorticity=lambda p, t: 0.0,
                  conserved=lambda p, x: np.hypot(x[..., 0], x[..., 1])))
_register(_System("abc", 3, True, {"A": 1.0, "B": 1.0, "C": 1.0}, _v_abc))


# ---------------------------------------------------------------------------
# rotating-frame images of 2D builtins (see frames.transform_field); the frame
# convention is x_frame = R(sense * omega * t)^T x
# ---------------------------------------------------------------------------

_J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _rotated_system(base: _System) -> _System:
    def velocity(p, x, t):
        base_p = {k[5:]: v for k, v in p.items() if k.startswith("base.")}
        th = p["sense"] * p["omega"] * t
        rt = _rot2(th)
        v = base.velocity(base_p, x @ rt.T, t)  # x @ R^T == R x rowwise
        return v @ rt - p["sense"] * p["omega"] * (x @ _J.T)

    def exact(p, x0, t0, t):
        if base.exact is None:
            raise NoExactSolutionError(base.system_id)
        base_p = {k[5:]: v for k, v in p.items() if k.startswith("base.")}
        sw = p["sense"] * p["omega"]
        y0 = x0 @ _rot2(sw * t0).T
        y = base.exact(base_p, y0, t0, t)
        return y @ _rot2(sw * t)

    return _System(f"rotated:{base.system_id}", 2, False,
                   {"omega": 1.0, "sense": 1.0}, velocity,
                   exact=exact if base.exact is not None else None)


def get_system(system_id: str) -> _System:
    if system_id in _REGISTRY:
        return _REGISTRY[system_id]
    if system_id.startswith("rotated:"):
        base_id = system_id.split(":", 1)[1]
        if base_id in _REGISTRY and _REGISTRY[base_id].dim == 2:
            return _rotated_system(_REGISTRY[base_id])
    raise UnknownSystemError(f"unknown system id {system_id!r}")


def list_systems() -> list[str]:
    return sorted(_REGISTRY)


def make_spec(system_id: str, **params: float) -> VectorFieldSpec:
    """Build a validated spec for a builtin, applying parameter defaults."""
    sys = get_system(system_id)
    merged = dict(sys.defaults)
    unknown = set(params) - set(merged) if not system_id.startswith("rotated:") else set()
    if unknown:
        raise ValueError(f"unknown parameters for {system_id}: {sorted(unknown)}")
    merged.update(params)
    for k, v in merged.items():
        if not math.isfinite(float(v)):
            raise ValueError(f"parameter {k} is not finite: {v}")
    if sys.validate is not None:
        sys.validate(merged)
    return VectorFieldSpec(system_id, merged, sys.dim, sys.autonomous)


def _check_point(spec: VectorFieldSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dim:
        raise ValueError(f"point dimension {x.shape[-1]} does not match "
                         f"system dimension {spec.dim}")
    return x


def evaluate_field(spec: VectorFieldSpec, x, t: float = 0.0) -> np.ndarray:
    """Velocity v(x, t); vectorized over leading axes of x."""
    sys = get_system(spec.system_id)
    return sys.velocity(spec.params, _check_point(spec, x), t)


def exact_solution(spec: VectorFieldSpec, x0, t0: float, t: float) -> np.ndarray:
    """Exact flow map, where one is registered."""
    sys = get_system(spec.system_id)
    if sys.exact is None:
        raise NoExactSolutionError(f"no exact solution registered for {spec.system_id!r}")
    return sys.exact(spec.params, _check_point(spec, x0), t0, t)


def has_exact_solution(spec: VectorFieldSpec) -> bool:
    return get_system(spec.system_id).exact is not None


def vorticity(spec: VectorFieldSpec, x, t: float) -> np.ndarray:
    sys = get_system(spec.system_id)
    if sys.vorticity is None:
        raise LookupError(f"no analytic vorticity for {spec.system_id!r}")
    return sys.vorticity(spec.params, _check_point(spec, x), t)


def mean_vorticity(spec: VectorFieldSpec, t: float) -> float:
    sys = get_system(spec.system_id)
    if sys.mean_vorticity is None:
        raise LookupError(f"no mean vorticity registered for {spec.system_id!r}")
    return sys.mean_vorticity(spec.params, t)


def conserved_quantity(spec: VectorFieldSpec, x) -> np.ndarray:
    sys = get_system(spec.system_id)
    if sys.conserved is None:
        raise LookupError(f"no conserved quantity registered for {spec.system_id!r}")
    return sys.conserved(spec.params, _check_point(spec, x))


# ---------------------------------------------------------------------------
# closed-form descriptor oracles
# ---------------------------------------------------------------------------

def _two_sinh(rate: float, p: float, tau: float) -> float:
    # int_{-tau}^{tau} (rate e^{rate t})^p dt = 2 rate^{p-1} sinh(rate p tau) / p
    return 2.0 * rate ** (p - 1.0) * math.sinh(rate * p * tau) / p


def _oracle_linear_saddle_mp(spec, x0, cfg):
    lam = spec.params["lambda"]
    x0 = np.asarray(x0, float)
    return float((abs(x0[0]) ** cfg.p + abs(x0[1]) ** cfg.p) * _two_sinh(lam, cfg.p, cfg.tau))


def _oracle_nonham_mp(spec, x0, cfg):
    lam, mu = spec.params["lambda"], spec.params["mu"]
    x0 = np.asarray(x0, float)
    return float(abs(x0[0]) ** cfg.p * _two_sinh(lam, cfg.p, cfg.tau)
                 + abs(x0[1]) ** cfg.p * _two_sinh(mu, cfg.p, cfg.tau))


def _oracle_global_attractor_mp(spec, x0, cfg):
    x0 = np.asarray(x0, float)
    return float((abs(x0[0]) ** cfg.p + abs(x0[1]) ** cfg.p) * _two_sinh(1.0, cfg.p, cfg.tau))


def _oracle_global_attractor_arc(spec, x0, cfg):
    x0 = np.asarray(x0, float)
    return float(2.0 * math.hypot(x0[0], x0[1]) * math.sinh(cfg.tau))


def _oracle_harmonic_arc(spec, x0, cfg):
    x0 = np.asarray(x0, float)
    return float(2.0 * cfg.tau * math.hypot(x0[0], x0[1]))


def _oracle_nonauto_linear_mp(spec, x0, cfg):
    # quadrature realization of the |x0|^p A + |y0|^p B split
    x0 = np.asarray(x0, float)
    p, t0, tau = cfg.p, cfg.t0, cfg.tau
    params = spec.params
    f0 = _forcing_antiderivative(params, t0)

    def kern(sign):
        def g(t):
            return (math.exp(sign * (_forcing_antiderivative(params, t) - f0))
                    * _forcing(params, t)) ** p
        return g

    a, _ = quad(kern(+1), t0 - tau, t0 + tau, limit=400)
    b, _ = quad(kern(-1), t0 - tau, t0 + tau, limit=400)
    return float(abs(x0[0]) ** p * a + abs(x0[1]) ** p * b)


_ORACLES: dict[tuple[str, str], Callable] = {
    ("linear-saddle", "mp"): _oracle_linear_saddle_mp,
    ("nonham-saddle", "mp"): _oracle_nonham_mp,
    ("global-attractor", "mp"): _oracle_global_attractor_mp,
    ("global-attractor", "arclength"): _oracle_global_attractor_arc,
    ("harmonic-oscillator", "arclength"): _oracle_harmonic_arc,
    ("nonauto-linear-saddle", "mp"): _oracle_nonauto_linear_mp,
    ("rest", "mp"): lambda spec, x0, cfg: 0.0,
    ("rest", "arclength"): lambda spec, x0, cfg: 0.0,
}


def oracle_descriptor(spec: VectorFieldSpec, x0, cfg) -> float:
    """Closed-form descriptor value where the analysis provides one."""
    key = (spec.system_id, cfg.kind)
    if key not in _ORACLES:
        raise OracleNotFoundError(f"no closed-form oracle for {key}")
    return _ORACLES[key](spec, x0, cfg)


def get_oracle(spec: VectorFieldSpec, kind: str) -> AnalyticOracle:
    key = (spec.system_id, kind)
    if key not in _ORACLES:
        raise OracleNotFoundError(f"no closed-form oracle for {key}")
    fn = _ORACLES[key]
    return AnalyticOracle("descriptor_closed_form",
                          lambda x0, cfg, _fn=fn: _fn(spec, x0, cfg))


def oracle_average_limit(spec: VectorFieldSpec, x0, cfg) -> float:
    """tau -> infinity limit of descriptor/(2 tau), where known in closed form."""
    x0 = np.asarray(x0, float)
    if spec.system_id == "harmonic-oscillator":
        rho = math.hypot(x0[0], x0[1])
        if cfg.kind == "arclength":
            return rho
        if cfg.kind == "mp" and cfg.p == 1.0:
            return 4.0 * rho / math.pi
    if spec.system_id == "rest":
        return 0.0
    raise OracleNotFoundError(
        f"no average limit for ({spec.system_id!r}, {cfg.kind!r}, p={getattr(cfg, 'p', None)})")
