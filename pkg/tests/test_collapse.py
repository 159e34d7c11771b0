import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from acoustic_decoherence import collapse as col
from acoustic_decoherence.collapse import CollapseProfile, Region, SigmaKind

DEFAULT = CollapseProfile.from_velocities(0.9, 1.1)
FROZEN = CollapseProfile(kappa=0.1, sigma_kind=SigmaKind.ZERO)
STEADY = CollapseProfile(kappa=0.1, sigma_kind=SigmaKind.ONE)


def test_profile_continuity_and_kappa():
    assert DEFAULT.kappa == pytest.approx(0.1)
    assert DEFAULT.v_min == pytest.approx(0.9) and DEFAULT.v_max == pytest.approx(1.1)
    for x in (DEFAULT.a, -DEFAULT.a):
        assert DEFAULT.velocity(x + 1e-12, 50.0) == pytest.approx(
            DEFAULT.velocity(x - 1e-12, 50.0), abs=1e-10)
    with pytest.raises(ValueError):
        CollapseProfile.from_velocities(0.8, 1.1)
    with pytest.raises(ValueError):
        CollapseProfile(tau_c=0.0)


@pytest.mark.parametrize("kind", [SigmaKind.TANH, SigmaKind.SMOOTHSTEP])
def test_sigma_endpoints_and_monotone(kind):
    t = np.linspace(0.0, 20.0, 2001)
    s = col.sigma(t, 1.0, kind)
    assert s[0] == 0.0
    assert s[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(s) >= 0)


def test_frozen_limit_is_free_propagation():
    ch = col.solve_characteristic(0.3, 7.0, FROZEN)
    assert ch.x[-1] == pytest.approx(0.3 - 7.0, abs=1e-9)
    assert col.trace_back(-2.0, 5.0, FROZEN) == pytest.approx(3.0, abs=1e-9)


def test_steady_linear_region_exponential():
    ch = col.solve_characteristic(0.5, 8.0, STEADY)
    assert not ch.crossed_boundary
    assert ch.x[-1] == pytest.approx(0.5 * math.exp(-0.8), rel=1e-8)
    x = 0.2
    assert col.trace_back(x, 5.0, STEADY) == pytest.approx(x * math.exp(0.5), rel=1e-8)


def _rk4_endpoint(x0, t_end, profile, steps):
    a, k, tc = profile.a, profile.kappa, profile.tau_c
    vmin, vmax = profile.v_min, profile.v_max

    def f(t, x):
        w = vmin if x > a else (vmax if x < -a else 1.0 - k * x)
        return math.tanh(t / tc) * w - 1.0

    h = t_end / steps
    x, t = x0, 0.0
    for _ in range(steps):
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h * k1 / 2)
        k3 = f(t + h / 2, x + h * k2 / 2)
        k4 = f(t + h, x + h * k3)
        x += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        t += h
    return x


@pytest.mark.parametrize("x0", [0.4, -0.3])
def test_tanh_profile_against_fixed_step_rk4(x0):
    # both starts stay inside |x| < a, where the field is smooth
    t_end = 10.0
    ref = _rk4_endpoint(x0, t_end, DEFAULT, 1_000_000)
    ch = col.solve_characteristic(x0, t_end, DEFAULT)
    assert abs(ch.x[-1] - ref) < 1e-8


def test_junction_crossing_time():
    # frozen: x0 - t reaches a at t = x0 - a
    ch = col.solve_characteristic(3.0, 5.0, FROZEN)
    assert len(ch.crossings) == 2
    t_c, x_c = ch.crossings[0]
    assert x_c == 1.0
    assert abs(t_c - 2.0) < 1e-9
    assert abs(ch.crossings[1][0] - 4.0) < 1e-9
    # steady: outside the hole dx/dt = -kappa a
    ch = col.solve_characteristic(1.5, 10.0, STEADY)
    t_c = ch.crossings[0][0]
    assert abs(t_c - 0.5 / 0.1) * 0.1 < 1e-9
    # afterwards pure exponential approach
    assert ch.x[-1] == pytest.approx(math.exp(-0.1 * (10.0 - 5.0)), rel=1e-8)


def test_horizon_attractor_rate():
    ch = col.solve_characteristic(-0.7, 30.0, STEADY)
    ts = np.linspace(1.0, 30.0, 50)
    xs = np.interp(ts, ch.t, ch.x)
    slope = np.polyfit(ts, np.log(np.abs(xs)), 1)[0]
    assert slope == pytest.approx(-STEADY.kappa, rel=0.01)


@given(st.floats(-15.0, 15.0), st.floats(0.5, 60.0))
def test_round_trip(x, t):
    x0 = col.trace_back(x, t, DEFAULT)
    ch = col.solve_characteristic(x0, t, DEFAULT)
    assert abs(ch.x[-1] - x) < 1e-7


@given(st.floats(-10.0, 10.0), st.floats(1e-3, 3.0), st.floats(1.0, 100.0))
def test_order_preserved(x0, gap, t):
    lo = col.propagate(x0, 0.0, t, DEFAULT)
    hi = col.propagate(x0 + gap, 0.0, t, DEFAULT)
    assert lo < hi


def test_jacobian_matches_finite_difference():
    x, t, h = 0.01, 20.0, 1e-5
    x0, jac = col.trace_back_with_jacobian(x, t, DEFAULT)
    fd = (col.trace_back(x + h, t, DEFAULT) - col.trace_back(x - h, t, DEFAULT)) / (2 * h)
    assert jac == pytest.approx(fd, rel=1e-5)
    assert jac > 1.0


def test_uniform_flow_has_no_junctions():
    flat = CollapseProfile(kappa=0.0)
    ch = col.solve_characteristic(2.0, 100.0, flat)
    assert ch.crossings == ()
    # v = sigma, so x(t) = x0 - t + ln cosh(t)
    assert ch.x[-1] == pytest.approx(2.0 - 100.0 + math.log(math.cosh(100.0)), abs=1e-7)


def test_classification_examples():
    assert col.classify_region(30.0, 2.0, DEFAULT) is Region.TRIVIAL_FLAT
    assert col.classify_region(-10.0, 100.0, DEFAULT) is Region.HAWKING
    sep = col.separatrix(100.0, DEFAULT)
    assert 0.0 < sep < 1e-3
    assert col.classify_region(sep - 1e-6, 100.0, DEFAULT) is Region.HAWKING
    assert col.classify_region(sep + 1e-6, 100.0, DEFAULT) is Region.TRIVIAL_FLAT


@pytest.mark.parametrize("t", [3.0, 10.0, 100.0])
def test_classification_flips_once(t):
    xs = np.linspace(-20.0, 20.0, 161)
    labels = [col.classify_region(x, t, DEFAULT) is Region.HAWKING for x in xs]
    flips = sum(a != b for a, b in zip(labels, labels[1:]))
    assert flips == 1
    assert labels[0] and not labels[-1]


def test_left_mode_at_t0():
    k = np.array([0.5, 1.0, 3.0])
    val = col.left_mode(1.3, 0.0, k, DEFAULT)
    assert np.allclose(val, np.exp(1j * k * 1.3) / np.sqrt(4 * np.pi * k), atol=1e-15)


def test_left_mode_constant_along_characteristic():
    k = 2.0
    ch = col.solve_characteristic(0.6, 40.0, DEFAULT)
    ref = col.left_mode(0.6, 0.0, k, DEFAULT)
    for i in range(5, len(ch.t), max(1, len(ch.t) // 10)):
        v = col.left_mode(ch.x[i], ch.t[i], k, DEFAULT)
        assert abs(v - ref) < 1e-8


def test_left_mode_redshift_in_steady_region():
    x, t, k = 0.05, 10.0, 1.5
    v = col.left_mode(x, t, k, STEADY)
    expected = np.exp(1j * k * x * math.exp(STEADY.kappa * t)) * col.mode_normalization(k)
    assert abs(v - expected) < 1e-8


def _dL_residual(x, t, k, h, profile):
    def psi(xx, tt):
        return col.left_mode(xx, tt, k, profile)

    dt = (psi(x, t + h) - psi(x, t - h)) / (2 * h)
    dx = (psi(x + h, t) - psi(x - h, t)) / (2 * h)
    return abs(dt + (profile.velocity(x, t) - 1.0) * dx)


def test_left_mode_annihilated_by_dL():
    x, t, k = 0.3, 2.0, 1.0
    r1 = _dL_residual(x, t, k, 0.02, DEFAULT)
    r2 = _dL_residual(x, t, k, 0.01, DEFAULT)
    assert r1 < 1e-3
    assert r1 / r2 == pytest.approx(4.0, abs=0.3)


def test_hawking_temperature():
    assert col.hawking_temperature(CollapseProfile(kappa=2 * math.pi)) == pytest.approx(1.0)
    assert col.hawking_temperature(CollapseProfile(kappa=0.3)) == pytest.approx(
        3 * col.hawking_temperature(CollapseProfile(kappa=0.1)))
    assert col.hawking_temperature(DEFAULT) == pytest.approx(0.1 / (2 * math.pi))


def test_bad_end_time():
    with pytest.raises(ValueError):
        col.solve_characteristic(0.0, 0.0, DEFAULT)
