import numpy as np
import pytest

from ldkit import systems
from ldkit.errors import BlowUpError
from ldkit.integrator import (IntegratorConfig, cumulative_quadrature,
                              integrate, integrate_with_quadrature,
                              quadrature_batch)


def _arc(x, t, v):
    return np.sqrt(np.sum(v * v, axis=-1))


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(h=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(h=0.1, max_steps=0)


def test_steps_for_rounds_down():
    cfg = IntegratorConfig(h=0.3)
    n, h_eff = cfg.steps_for(1.0)
    assert n == 4 and h_eff == pytest.approx(0.25)
    n, h_eff = cfg.steps_for(0.9)
    assert n == 3 and h_eff == pytest.approx(0.3)
    with pytest.raises(ValueError):
        IntegratorConfig(h=1e-5, max_steps=100).steps_for(1.0)


def test_single_rk4_step_hand_value():
    # xdot = x, x0 = 1, one step h = 0.1: classical RK4 gives 1.1051708333...
    spec = systems.make_spec("linear-saddle")
    traj = integrate(spec, [1.0, 0.0], 0.0, 0.1, IntegratorConfig(h=0.1))
    assert traj.states[-1, 0] == pytest.approx(1.1051708333333332, abs=1e-16)


def test_integrate_matches_exact_forward_and_backward():
    spec = systems.make_spec("harmonic-oscillator")
    cfg = IntegratorConfig(h=0.01)
    for t1 in (3.0, -3.0):
        traj = integrate(spec, [0.3, -1.1], 0.0, t1, cfg)
        expected = systems.exact_solution(spec, [0.3, -1.1], 0.0, t1)
        assert np.allclose(traj.states[-1], expected, atol=1e-8)
        assert traj.times[-1] == pytest.approx(t1)
        assert traj.times[0] == 0.0


def test_integrate_zero_span():
    spec = systems.make_spec("rest")
    traj = integrate(spec, [1.0, 2.0], 0.5, 0.5)
    assert traj.states.shape == (1, 2)


def test_integrate_blow_up():
    spec = systems.make_spec("linear-saddle")
    with pytest.raises(BlowUpError) as exc:
        integrate(spec, [1e300, 0.0], 0.0, 50.0, IntegratorConfig(h=0.5))
    assert exc.value.last_finite_time < 50.0


def test_quadrature_arc_length_harmonic():
    # speed is constant rho, so the two-sided arc length is 2 tau rho
    spec = systems.make_spec("harmonic-oscillator")
    res = integrate_with_quadrature(spec, [2.0, 0.0], 0.0, 10.0,
                                    IntegratorConfig(h=0.01), _arc)
    assert res.value == pytest.approx(40.0, rel=1e-9)
    assert not res.partial and res.reached == pytest.approx(10.0)


def test_quadrature_zero_tau():
    spec = systems.make_spec("harmonic-oscillator")
    vals, partial, reached = quadrature_batch(spec, [[1.0, 0.0]], 0.0, 0.0,
                                              IntegratorConfig(), _arc)
    assert vals[0] == 0.0 and not partial[0] and reached[0] == 0.0


def test_safety_box_flags_partial():
    spec = systems.make_spec("nonham-saddle", **{"lambda": 2.0, "mu": 1.0})
    cfg = IntegratorConfig(h=0.01, safety_box=1e6)
    res = integrate_with_quadrature(spec, [0.5, 0.5], 0.0, 15.0, cfg, _arc)
    assert res.partial
    assert 0.0 < res.reached < 15.0
    assert np.isfinite(res.value)
    # enlarged box: no truncation
    cfg_big = IntegratorConfig(h=0.01, safety_box=1e15)
    res2 = integrate_with_quadrature(spec, [0.5, 0.5], 0.0, 15.0, cfg_big, _arc)
    assert not res2.partial


def test_batch_rows_independent_of_batching():
    spec = systems.make_spec("rotated-saddle")
    pts = np.random.default_rng(7).uniform(-1, 1, size=(9, 2))
    cfg = IntegratorConfig(h=0.05)
    full, _, _ = quadrature_batch(spec, pts, 0.0, 3.0, cfg, _arc)
    for i, pt in enumerate(pts):
        single, _, _ = quadrature_batch(spec, pt[None, :], 0.0, 3.0, cfg, _arc)
        assert single[0] == full[i]


def test_cumulative_matches_direct():
    spec = systems.make_spec("harmonic-oscillator")
    cfg = IntegratorConfig(h=0.1)
    taus = np.array([1.0, 2.5, 5.0])
    tau_actual, totals, partial = cumulative_quadrature(
        spec, [[1.0, 1.0]], 0.0, taus, cfg, _arc)
    assert np.allclose(tau_actual, taus)
    for j, tau in enumerate(tau_actual):
        direct, _, _ = quadrature_batch(spec, [[1.0, 1.0]], 0.0, tau, cfg, _arc)
        assert totals[0, j] == pytest.approx(direct[0], rel=1e-12)
    assert not partial.any()


def test_cumulative_validates_samples():
    spec = systems.make_spec("rest")
    with pytest.raises(ValueError):
        cumulative_quadrature(spec, [[0.0, 0.0]], 0.0, [2.0, 1.0],
                              IntegratorConfig(), _arc)
    with pytest.raises(ValueError):
        cumulative_quadrature(spec, [[0.0, 0.0]], 0.0, [],
                              IntegratorConfig(), _arc)


def test_rk4_fourth_order_convergence():
    spec = systems.make_spec("linear-saddle")
    x0, t1 = np.array([1.0, 1.0]), 2.0
    exact = systems.exact_solution(spec, x0, 0.0, t1)
    errs = []
    for h in (0.05, 0.025):
        traj = integrate(spec, x0, 0.0, t1, IntegratorConfig(h=h))
        errs.append(np.linalg.norm(traj.states[-1] - exact))
    ratio = errs[0] / errs[1]
    assert 12.0 <= ratio <= 20.0
