import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from acoustic_decoherence import collapse as col
from acoustic_decoherence import correlations as cr
from acoustic_decoherence import environment as env
from acoustic_decoherence.collapse import CollapseProfile, Region, SigmaKind
from acoustic_decoherence.errors import DegenerateMode, NonConvergentSum

PROFILE = CollapseProfile.from_velocities(0.9, 1.1)
STEADY = CollapseProfile(kappa=0.1, sigma_kind=SigmaKind.ONE)
TH = col.hawking_temperature(PROFILE)
XS = np.linspace(-8.0, 8.0, 161)
K_MIN = math.pi / (20.0 + 100.0)
BATH = env.OhmicBath(gamma=0.01, cutoff=math.pi / 0.1)


@pytest.fixture(scope="module")
def chars():
    return cr.CharacteristicData.build(-10.0, XS, 100.0, PROFILE)


def test_mode_grid_shape():
    g = cr.default_modes(PROFILE, 100.0)
    assert g.dk == pytest.approx(math.pi / 120.0)
    assert g.k_cut == pytest.approx(10 * math.pi)
    assert g.k[0] == 0.0 and g.k[-1] >= 40 * g.k_cut
    assert g.weights[0] == pytest.approx(0.5 * g.dk)
    assert g.refined().dk == 0.5 * g.dk


@pytest.mark.parametrize("d", [0.0, 0.05, 0.3, 1.0, 5.0])
def test_vacuum_kernel_matches_continuum(d):
    modes = cr.ModeGrid(dk=math.pi / 200.0, k_cut=10.0)
    ref = cr.vacuum_kernel_continuum(d, 10.0)
    assert cr.mode_kernel(d, 0.0, modes) == pytest.approx(ref, rel=1e-3, abs=1e-6)


def test_mode_weights_nondecreasing_in_temperature():
    modes = cr.ModeGrid(dk=0.05, k_cut=5.0)
    prev = None
    for T in (0.0, 0.01, 0.1, 1.0, 10.0):
        _, a = cr.mode_coefficients(T, modes)
        assert np.all(a[1:] >= 0)
        if prev is not None:
            assert np.all(a[1:] >= prev[1:])
        prev = a


def test_momentum_minus_at_t0():
    k = np.array([0.3, 2.0])
    val = cr.momentum_minus(0.7, 0.0, k, PROFILE)
    assert np.allclose(val, 1j * k * np.exp(1j * k * 0.7) / np.sqrt(4 * np.pi * k))


def test_momentum_minus_equals_comoving_derivative():
    x, t, k, h = 0.4, 3.0, 1.2, 1e-3

    def psi(xx, tt):
        return col.left_mode(xx, tt, k, PROFILE)

    comoving = ((psi(x, t + h) - psi(x, t - h)) / (2 * h)
                + PROFILE.velocity(x, t) * (psi(x + h, t) - psi(x - h, t)) / (2 * h))
    assert abs(comoving - cr.momentum_minus(x, t, k, PROFILE)) < 1e-5


def test_momentum_minus_blueshift():
    x, t, k = 0.05, 10.0, 1.5
    mag = abs(cr.momentum_minus(x, t, k, STEADY))
    assert mag == pytest.approx(k * math.exp(STEADY.kappa * t) * col.mode_normalization(k),
                                rel=1e-7)


@given(st.floats(-15.0, 15.0), st.floats(-15.0, 15.0))
def test_correlation_symmetric(x1, x2):
    modes = cr.default_modes(PROFILE, 20.0)
    c12 = cr.closed_correlation([x2], PROFILE, 0.0, x1=x1, t=20.0, modes=modes,
                                check_convergence=False).values[0]
    c21 = cr.closed_correlation([x1], PROFILE, 0.0, x1=x2, t=20.0, modes=modes,
                                check_convergence=False).values[0]
    assert c12 == pytest.approx(c21, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("T", [0.0, TH, 10 * TH])
def test_equal_points_positive(T):
    for x in (-10.0, -0.5, 0.0, 3.0):
        g = cr.closed_correlation([x], PROFILE, T, x1=x, t=50.0, check_convergence=False)
        assert g.values[0] > 0


def test_trivial_region_bounded_by_flat_envelope():
    xs = np.linspace(20.0, 40.0, 21)
    g = cr.closed_correlation(xs, PROFILE, 0.0, x1=25.0, t=2.0, check_convergence=False)
    assert all(r is Region.TRIVIAL_FLAT for r in g.regions)
    env0 = cr.mode_kernel(0.0, 0.0, cr.default_modes(PROFILE, 2.0))
    assert np.all(np.abs(g.values) <= env0 * (1 + 1e-9))
    assert np.max(np.abs(g.signal)) < 1e-6 * env0


def test_grid_invariants(chars):
    g = cr.correlation_from_characteristics(chars, 0.0, cr.default_modes(PROFILE, 100.0), 1.0)
    assert len(g.values) == len(g.xs) == len(g.regions)
    assert np.allclose(g.values - g.flat, g.signal)
    rec = list(g.records())
    assert set(rec[0]) == {"x/a", "region", "C_raw", "C_signal"}
    with pytest.raises(ValueError):
        cr.CorrelationGrid(0.0, np.zeros(3), 1.0, 0.0, np.zeros(2), np.zeros(2), [])


@pytest.mark.parametrize("T_over", [0.0, 1.0, 3.0])
def test_peak_present(chars, T_over):
    g = cr.closed_correlation(XS, PROFILE, T_over * TH, chars=chars)
    pm = cr.peak_metrics(g)
    assert pm.present
    assert abs(pm.peak_x) <= 0.5


def test_no_horizon_no_peak():
    flat = CollapseProfile(kappa=0.0)
    g = cr.closed_correlation(XS, flat, 0.0)
    assert not cr.peak_metrics(g).present


def test_featureless_grid():
    g = cr.CorrelationGrid(0.0, XS, 1.0, 0.0, np.zeros_like(XS), np.zeros_like(XS),
                           [Region.HAWKING] * len(XS))
    assert not cr.peak_metrics(g).present


def test_coarse_grid_flags_nonconvergence(chars):
    with pytest.raises(NonConvergentSum):
        cr.closed_correlation(XS, PROFILE, chars=chars,
                              modes=cr.ModeGrid(dk=math.pi / 3, k_cut=10 * math.pi))


def test_open_equals_closed_without_coupling():
    cc, co = cr.open_correction(K_MIN, 50.0, PROFILE, BATH.with_(gamma=0.0))
    assert cc == co


def test_open_correction_at_t0():
    cc, co = cr.open_correction(K_MIN, 0.0, PROFILE, BATH)
    assert cc == co
    _, delta = cr.relative_correction_series(0.5, 5.0, BATH)
    assert delta[0] == 0.0


def test_open_correction_scales_with_gamma_squared():
    cc1, co1 = cr.open_correction(0.5, 20.0, PROFILE, BATH)
    cc4, co4 = cr.open_correction(0.5, 20.0, PROFILE, BATH.with_(gamma=4 * BATH.gamma))
    assert cc1 == cc4
    assert (co4 - cc4) / (co1 - cc1) == pytest.approx(16.0, rel=1e-9)


def test_correction_secular_rate():
    # noise and damping together grow the variance at gamma^2 pi / 2 per unit time
    times, delta = cr.relative_correction_series(2.0, 400.0, BATH, points_per_cutoff=3)
    i, j = np.searchsorted(times, [200.0, 400.0])
    rate = (delta[j - 1] - delta[i]) / (times[j - 1] - times[i])
    assert rate == pytest.approx(BATH.gamma ** 2 * math.pi / 2, rel=0.05)


def test_degenerate_mode():
    with pytest.raises(DegenerateMode):
        cr.relative_environment_contribution(0.0, 10.0, PROFILE, BATH)
    with pytest.raises(DegenerateMode):
        cr.relative_correction_series(0.0, 10.0, BATH)


def test_er_small_at_early_times():
    weak = BATH.with_(gamma=math.sqrt(3.2e-5))
    assert cr.relative_environment_contribution(K_MIN, 0.1, PROFILE, weak) < 0.01


def test_er_decreases_with_k():
    vals = [cr.relative_environment_contribution(k, 10.0, PROFILE, BATH)
            for k in (K_MIN, 10 * K_MIN, 100 * K_MIN)]
    assert vals[0] > vals[1] > vals[2]


def test_er_series_matches_pointwise():
    times = np.array([1.0, 5.0, 10.0])
    series = cr.er_series(0.5, times, BATH)
    point = cr.relative_environment_contribution(0.5, 10.0, PROFILE, BATH)
    assert series[-1] == pytest.approx(point, rel=1e-12)


def test_er_table_zero_coupling():
    rows = cr.er_table(K_MIN, cr.default_er_times(), PROFILE, BATH.with_(gamma=0.0))
    assert len(rows) == 43
    assert all(r.e_r == 0.0 for r in rows if not r.error)


def test_crossing_time_interpolation():
    t = np.array([1.0, 10.0, 100.0])
    assert cr.crossing_time(t, [0.1, 0.2, 0.3]) is None
    assert cr.crossing_time(t, [0.6, 0.7, 0.8]) == 1.0
    assert cr.crossing_time(t, [0.0, 1.0, 2.0]) == pytest.approx(math.sqrt(10.0))
