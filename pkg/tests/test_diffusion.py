import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reinforced_qsd.diffusion import (INTERIOR, DiffusionModel, Hit, absorption_times, ball, box,
                                      detect_absorption, estimate_green_mc, euler_step,
                                      fit_survival_rate, interval, simulate_until_absorption)
from reinforced_qsd.errors import (ModelEvaluationError, ParameterError, RunawayPathError)
from reinforced_qsd.models import brownian, constant_drift, make_model, polynomial


UNIT = interval(0.0, 1.0)
DOMAINS = (interval(-1, 1.5), ball([0.0, 0.0], 1.0), box([-1, 0], [1, 1]))
DRIFTED = constant_drift([0.7])


def zero_model(dim=1):
    return DiffusionModel(dim, lambda x: np.zeros(dim), lambda x: np.zeros((dim, dim)), dim)


def test_euler_step_degenerate_coefficients_return_x():
    assert euler_step(zero_model(), [0.3], 0.1, [2.0])[0] == 0.3


def test_euler_step_brownian():
    x = euler_step(brownian(1), [0.5], 0.01, [1.0])
    assert x[0] == pytest.approx(0.6, abs=1e-15)


def test_euler_step_linear_drift():
    m = DiffusionModel(1, lambda x: -x, lambda x: np.zeros((1, 1)), 1)
    assert euler_step(m, [1.0], 0.1, [0.0])[0] == pytest.approx(0.9, abs=1e-15)


def test_euler_step_non_finite_coefficient_names_point():
    m = DiffusionModel(1, lambda x: np.array([np.inf]), lambda x: np.ones((1, 1)), 1)
    with pytest.raises(ModelEvaluationError) as info:
        euler_step(m, [0.25], 0.1, [0.0])
    assert "0.25" in str(info.value)
    assert info.value.point[0] == 0.25


@given(st.floats(-5, 5), st.floats(1e-6, 1.0), st.floats(-4, 4))
def test_euler_step_deterministic(x, dt, z):
    m = DRIFTED
    a = euler_step(m, [x], dt, [z])
    assert np.array_equal(a, euler_step(m, [x], dt, [z]))
    assert a[0] == pytest.approx(x + 0.7 * dt + z * math.sqrt(dt))


def test_detect_absorption_examples():
    d = interval(0.0, 1.0)
    assert detect_absorption(d, [0.5], [0.6], 1e-6) is INTERIOR
    hit = detect_absorption(d, [0.5], [-0.5], 1e-6)
    assert isinstance(hit, Hit) and abs(hit.fraction - 0.5) <= 1e-6
    assert abs(detect_absorption(d, [0.9], [1.1], 1e-6).fraction - 0.5) <= 1e-6


def test_detect_absorption_rejects_bad_tol():
    with pytest.raises(ParameterError):
        detect_absorption(interval(), [0.5], [2.0], 0.0)


@given(st.floats(0.01, 0.99), st.floats(1.01, 3.0))
def test_detect_absorption_matches_linear_interpolation(x, y):
    hit = detect_absorption(UNIT, [x], [y], 1e-9)
    assert hit.fraction == pytest.approx((1.0 - x) / (y - x), abs=1e-9)


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_domain_contains_iff_positive_distance(p):
    for dom in DOMAINS:
        x = np.array(p[:dom.dim])
        assert dom.contains(x) == (dom.boundary_distance(x) > 0)


def test_domain_interior_point_inside():
    for dom in (interval(2, 3), ball([1.0, -1.0], 0.5), box([0, 0, 0], [1, 2, 3])):
        assert dom.contains(dom.interior_point)
        assert dom.boundary_distance(dom.interior_point) > 0


def test_check_coefficients_samples_interior():
    m, d = make_model("bm-disk")
    m.check_coefficients(d, 32, np.random.default_rng(0))
    # log of a negative number is nan on the left half
    bad = DiffusionModel(1, lambda x: np.log(x - 0.5), lambda x: np.ones((1, 1)), 1)
    with pytest.raises(ModelEvaluationError):
        bad.check_coefficients(interval(0.0, 1.0), 50, np.random.default_rng(0))


def test_path_time_bookkeeping_and_containment():
    m, d = make_model("bm-interval")
    for seed in range(20):
        p = simulate_until_absorption(m, d, [0.999], 1e-3, np.random.default_rng(seed))
        assert p.absorption_time > 0
        assert np.all((p.states > 0) & (p.states < 1))
        expected = (len(p.states) - 1) * p.dt + p.hit_fraction * p.dt
        assert p.absorption_time == pytest.approx(expected, rel=1e-12)
        assert p.weights.sum() == pytest.approx(p.absorption_time, rel=1e-12)
        assert 0 < p.hit_fraction <= 1


def test_path_is_reproducible():
    m, d = make_model("bm-disk")
    a = simulate_until_absorption(m, d, [0.1, 0.2], 1e-3, np.random.default_rng(9))
    b = simulate_until_absorption(m, d, [0.1, 0.2], 1e-3, np.random.default_rng(9))
    assert np.array_equal(a.states, b.states) and a.absorption_time == b.absorption_time


def test_deterministic_exit_time():
    m = DiffusionModel(1, lambda x: np.ones(1), lambda x: np.zeros((1, 1)), 1)
    dt = 1e-3
    p = simulate_until_absorption(m, interval(), [0.7], dt, np.random.default_rng(0))
    assert abs(p.absorption_time - 0.3) <= dt


def test_runaway_path():
    with pytest.raises(RunawayPathError):
        simulate_until_absorption(zero_model(), interval(), [0.5], 0.1,
                                  np.random.default_rng(0), max_steps=5000)


def test_start_outside_domain_is_rejected():
    with pytest.raises(ParameterError):
        simulate_until_absorption(brownian(1), interval(), [1.5], 0.1, np.random.default_rng(0))


def test_bridge_correction_shortens_exit_times():
    # the correction catches excursions between grid points, so exits come earlier
    m, d = make_model("bm-interval")
    rng = np.random.default_rng(3)
    plain = absorption_times(m, d, [0.5], 1e-2, 3000, rng).mean()
    bridged = absorption_times(m, d, [0.5], 1e-2, 3000, rng, bridge_correction=True).mean()
    assert bridged < plain
    assert abs(bridged - 0.25) < abs(plain - 0.25)


def test_green_mc_zero_function():
    m, d = make_model("bm-interval")
    est, se = estimate_green_mc(m, d, [0.5], lambda s: np.zeros(len(s)), 10, 1e-3,
                                np.random.default_rng(0))
    assert (est, se) == (0.0, 0.0)


@pytest.mark.parametrize("x", [0.2, 0.4, 0.6, 0.8])
def test_green_mc_matches_quadratic(x):
    # E_x tau = x(1-x); Euler exits are detected late by O(sqrt(dt))
    dt = 1e-3
    m, d = make_model("bm-interval")
    est, se = estimate_green_mc(m, d, [x], lambda s: np.ones(len(s)), 4000, dt,
                                np.random.default_rng(int(10 * x)))
    assert abs(est - x * (1 - x)) <= 3 * se + 2 * math.sqrt(dt)


def test_disk_exit_time_from_centre():
    dt = 1e-3
    m, d = make_model("bm-disk")
    est, se = estimate_green_mc(m, d, [0.0, 0.0], lambda s: np.ones(len(s)), 3000, dt,
                                np.random.default_rng(2))
    assert abs(est - 0.5) <= 3 * se + 2 * math.sqrt(dt)


def test_survival_tail_rate():
    m, d = make_model("bm-interval")
    times = absorption_times(m, d, [0.5], 1e-3, 20000, np.random.default_rng(4))
    rate = fit_survival_rate(times, t_min=0.3)
    assert rate == pytest.approx(math.pi ** 2 / 2, rel=0.10)


def test_polynomial_model_coefficients():
    m = polynomial([[1.0, -2.0]], [[0.5, 0.0, 1.0]])
    b, s = m.coefficients([2.0])
    assert b[0] == pytest.approx(1.0 - 4.0)
    assert s[0, 0] == pytest.approx(0.5 + 4.0)


def test_make_model_registry_errors():
    with pytest.raises(ParameterError):
        make_model("nope")
    with pytest.raises(ParameterError):
        make_model("custom-polynomial", {"drift_coeffs": [[0.0]], "diffusion_coeffs": [[1.0]]})
    with pytest.raises(ParameterError):
        make_model("bm-interval", {"c": 1.0})
    with pytest.raises(ParameterError):
        make_model("bm-interval", domain={"kind": "ball", "center": [0, 0]})
    m, d = make_model("custom-polynomial", {"drift_coeffs": [[0.0]], "diffusion_coeffs": [[1.0]]},
                      {"kind": "interval", "a": -1.0, "b": 1.0})
    assert d.contains(np.array([0.9])) and not d.contains(np.array([1.1]))
