import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldkit import systems
from ldkit.frames import RotatingFrame, transform_field, transform_point
from ldkit.integrator import IntegratorConfig, integrate


def test_frame_validation():
    with pytest.raises(ValueError):
        RotatingFrame(-1.0)
    with pytest.raises(ValueError):
        RotatingFrame(1.0, sense=0)
    assert RotatingFrame(2.0, sense=-1).angle(0.5) == pytest.approx(-1.0)


@given(x=st.floats(-3, 3), y=st.floats(-3, 3), t=st.floats(-5, 5),
       omega=st.floats(0, 3), sense=st.sampled_from([1, -1]))
@settings(max_examples=50, deadline=None)
def test_transform_point_roundtrip(x, y, t, omega, sense):
    frame = RotatingFrame(omega, sense)
    p = np.array([x, y])
    q = transform_point(frame, p, t)
    back = transform_point(frame, q, t, inverse=True)
    assert np.allclose(back, p, atol=1e-12)
    assert np.hypot(*q) == pytest.approx(np.hypot(x, y), abs=1e-12)


def test_transform_point_known_angle():
    frame = RotatingFrame(math.pi / 2.0)
    q = transform_point(frame, [1.0, 0.0], 1.0)   # rotate by -pi/2
    assert np.allclose(q, [0.0, -1.0], atol=1e-12)


def test_rest_frame_is_oscillator():
    spec = systems.make_spec("rest")
    out = transform_field(spec, RotatingFrame(1.0, 1))
    assert out.system_id == "harmonic-oscillator"


def test_corotating_saddle_is_stationary():
    spec = systems.make_spec("rotating-saddle", omega=2.0)
    out = transform_field(spec, RotatingFrame(2.0, -1))
    assert out.system_id == "rotated-saddle"
    # a mismatched rate does not collapse to the stationary system
    other = transform_field(spec, RotatingFrame(1.0, -1))
    assert other.system_id == "rotated:rotating-saddle"
    assert other.params["base.omega"] == 2.0


def test_zero_omega_identity():
    spec = systems.make_spec("linear-saddle")
    assert transform_field(spec, RotatingFrame(0.0)) is spec


def test_transform_field_rejections():
    with pytest.raises(ValueError):
        transform_field(systems.make_spec("abc"), RotatingFrame(1.0))
    composed = transform_field(systems.make_spec("linear-saddle"),
                               RotatingFrame(1.0))
    with pytest.raises(ValueError):
        transform_field(composed, RotatingFrame(1.0))


def _conjugacy_error(lab_spec, frame_spec, frame, x0, t_end, h):
    """Max distance between the transformed lab trajectory and the frame one."""
    cfg = IntegratorConfig(h=h)
    lab = integrate(lab_spec, x0, 0.0, t_end, cfg)
    q0 = transform_point(frame, x0, 0.0)
    framed = integrate(frame_spec, q0, 0.0, t_end, cfg)
    errs = [np.linalg.norm(transform_point(frame, xs, t) - qs)
            for t, xs, qs in zip(lab.times, lab.states, framed.states)]
    return max(errs)


def test_conjugacy_rest_oscillator():
    err = _conjugacy_error(systems.make_spec("rest"),
                           systems.make_spec("harmonic-oscillator"),
                           RotatingFrame(1.0, 1), np.array([0.7, -0.2]),
                           t_end=10.0, h=0.01)
    assert err < 1e-6


def test_conjugacy_rotating_stationary_saddle():
    err = _conjugacy_error(systems.make_spec("rotating-saddle", omega=2.0),
                           systems.make_spec("rotated-saddle"),
                           RotatingFrame(2.0, -1), np.array([0.3, 0.25]),
                           t_end=3.0, h=0.002)
    assert err < 1e-6


def test_composed_spec_velocity_consistent():
    """The generic frame-composed field matches the transformed trajectory."""
    base = systems.make_spec("linear-saddle", **{"lambda": 0.7})
    frame = RotatingFrame(1.3, 1)
    composed = transform_field(base, frame)
    x0 = np.array([0.4, 0.6])
    cfg = IntegratorConfig(h=0.002)
    lab = integrate(base, x0, 0.0, 2.0, cfg)
    framed = integrate(composed, transform_point(frame, x0, 0.0), 0.0, 2.0, cfg)
    errs = [np.linalg.norm(transform_point(frame, xs, t) - qs)
            for t, xs, qs in zip(lab.times, lab.states, framed.states)]
    assert max(errs) < 1e-8
    # and the composed exact flow agrees with the composed integration
    exact_end = systems.exact_solution(composed, transform_point(frame, x0, 0.0),
                                       0.0, 2.0)
    assert np.allclose(framed.states[-1], exact_end, atol=1e-8)
