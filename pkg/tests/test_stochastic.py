import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from acoustic_decoherence import collapse as col
from acoustic_decoherence import correlations as cr
from acoustic_decoherence import environment as env
from acoustic_decoherence import stochastic as sto
from acoustic_decoherence.collapse import CollapseProfile, SigmaKind
from acoustic_decoherence.errors import CovarianceNotPSD

PROFILE = CollapseProfile.from_velocities(0.9, 1.1)
FROZEN = CollapseProfile(kappa=0.1, sigma_kind=SigmaKind.ZERO)
BATH = env.OhmicBath(gamma=0.5, cutoff=10.0)
TIMES = np.linspace(0.0, 2.0, 21)
XS = np.linspace(-4.0, 4.0, 17)


@pytest.fixture(scope="module")
def ensemble():
    return sto.sample_noise(TIMES, BATH, seed=3, n_sites=10_000)


def test_covariance_matrix_entries():
    cov = sto.noise_covariance(TIMES, BATH)
    assert cov.shape == (21, 21)
    assert np.allclose(cov, cov.T)
    assert cov[0, 3] == pytest.approx(BATH.gamma ** 2 * env.noise_kernel_closed(0.3, BATH))


def test_sample_covariance_matches(ensemble):
    xi = ensemble.xi
    M = xi.shape[0]
    cov = sto.noise_covariance(TIMES, BATH)
    emp = xi.T @ xi / M
    d = np.diag(cov)
    se = np.sqrt((np.outer(d, d) + cov ** 2) / M)
    assert np.max(np.abs(emp - cov) / se) < 5.0


def test_zero_mean(ensemble):
    xi = ensemble.xi
    M = xi.shape[0]
    sig = xi.std(axis=0, ddof=1)
    assert np.all(np.abs(xi.mean(axis=0)) < 4 * sig / math.sqrt(M))


def test_seed_determinism():
    a = sto.sample_noise(TIMES, BATH, seed=42, n_sites=3)
    b = sto.sample_noise(TIMES, BATH, seed=42, n_sites=3)
    c = sto.sample_noise(TIMES, BATH, seed=43, n_sites=3)
    assert np.array_equal(a.xi, b.xi)
    assert not np.array_equal(a.xi, c.xi)


def test_amplitude_linear_in_gamma():
    a = sto.sample_noise(TIMES, BATH, seed=1, n_sites=4)
    b = sto.sample_noise(TIMES, BATH.with_(gamma=3 * BATH.gamma), seed=1, n_sites=4)
    assert np.allclose(b.xi, 3 * a.xi, rtol=1e-8, atol=1e-12)


def test_discrete_delta_scaling():
    a = sto.sample_noise(TIMES, BATH, seed=1, n_sites=2, dx=1.0)
    b = sto.sample_noise(TIMES, BATH, seed=1, n_sites=2, dx=0.25)
    assert np.allclose(b.xi, 2 * a.xi)


def test_sites_uncorrelated():
    pairs = np.array([sto.sample_noise(TIMES, BATH, seed=s, n_sites=2).xi[:, 10]
                      for s in range(4000)])
    x, y = pairs[:, 0], pairs[:, 1]
    cross = np.mean(x * y)
    se = math.sqrt(np.mean(x ** 2) * np.mean(y ** 2) / len(x))
    assert abs(cross) < 5 * se


def test_not_psd_raises_and_clipping_warns():
    with pytest.raises(CovarianceNotPSD):
        sto.noise_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.warns(RuntimeWarning, match="clipping 1 negative"):
        f = sto.noise_factor(np.diag([1.0, -1e-13]))
    assert np.allclose(f @ f, np.diag([1.0, 0.0]))
    assert np.all(sto.noise_factor(np.zeros((2, 2))) == 0)


def test_green_flat_space():
    src = (1.0, 0.5)
    assert sto.green_retarded(src, (3.0, 0.5), FROZEN) == 0.5
    assert sto.green_retarded(src, (3.0, 2.4), FROZEN) == 0.5
    assert sto.green_retarded(src, (3.0, 2.6), FROZEN) == 0.0
    assert sto.green_retarded(src, (3.0, -1.6), FROZEN) == 0.0


@given(st.floats(0.0, 50.0), st.floats(-20.0, 20.0), st.floats(0.0, 50.0),
       st.floats(-20.0, 20.0))
def test_green_causal(ts, xs, dt, xf):
    assert sto.green_retarded((ts, xs), (ts - dt, xf), PROFILE) == 0.0


@pytest.mark.parametrize("x_src", [-3.0, 0.3, 4.0])
def test_green_support_follows_characteristics(x_src):
    tf = 30.0
    left = col.solve_characteristic(x_src, tf, PROFILE, -1.0).x[-1]
    right = col.solve_characteristic(x_src, tf, PROFILE, +1.0).x[-1]
    g = lambda x: sto.green_retarded((0.0, x_src), (tf, x), PROFILE)
    assert g(left + 1e-6) == 0.5 and g(left - 1e-6) == 0.0
    assert g(right - 1e-6) == 0.5 and g(right + 1e-6) == 0.0


def test_thermal_initial_variances():
    rng = np.random.default_rng(0)
    ini = sto.thermal_initial(2.0, 1.0, 200_000, rng)
    coth = 1.0 / math.tanh(1.0)
    assert ini.A.var() == pytest.approx(coth / 4.0, rel=0.02)
    assert ini.B.var() == pytest.approx(coth, rel=0.02)


def _dissipation_cos_reference(s, omega, cutoff):
    # (D * cos)(s) = int_0^L nu^2 (cos ws - cos nu s) / (nu^2 - w^2) dnu
    #             = L cos ws - sin(L s)/s + w^2 int_0^L (cos ws - cos nu s)/(nu^2 - w^2) dnu
    if s == 0:
        return 0.0

    def f(nu):
        den = nu * nu - omega * omega
        if abs(nu - omega) < 1e-7:
            return -s * math.sin(omega * s) / (2 * omega)
        return (math.cos(omega * s) - math.cos(nu * s)) / den

    i2, _ = integrate.quad(f, 0.0, cutoff, points=[omega], limit=2000, epsabs=1e-13,
                           epsrel=1e-12)
    return cutoff * math.cos(omega * s) - math.sin(cutoff * s) / s + omega ** 2 * i2


def test_dissipation_convolution_against_analytic():
    omega, cutoff = 1.3, 10.0
    times = np.linspace(0.0, 6.0, 6001)
    lattice = sto.dissipation_convolution(times, np.cos(omega * times), cutoff)
    idx = np.arange(0, times.size, 250)
    ref = np.array([_dissipation_cos_reference(times[i], omega, cutoff) for i in idx])
    assert np.max(np.abs(lattice[idx] - ref)) < 1e-3 * np.max(np.abs(ref))


def test_langevin_free_without_coupling():
    times = np.linspace(0.0, 3.0, 61)
    bath = BATH.with_(gamma=0.0)
    noise = sto.sample_noise(times, bath, seed=0, n_sites=5)
    ini = sto.thermal_initial(1.5, 0.0, 5, np.random.default_rng(1))
    q, p, dq, dp = sto.langevin_realization(noise, ini, 1.5, bath)
    assert np.all(dq == 0) and np.all(dp == 0)
    expect = ini.A[:, None] * np.cos(1.5 * times) + ini.B[:, None] / 1.5 * np.sin(1.5 * times)
    assert np.allclose(q, expect)


def test_langevin_noise_term_averages_out():
    times = np.linspace(0.0, 3.0, 61)
    noise = sto.sample_noise(times, BATH, seed=5, n_sites=4000)
    zero = sto.ModeInitial(np.zeros(4000), np.zeros(4000))
    _, _, dq, _ = sto.langevin_realization(noise, zero, 1.5, BATH)
    se = dq.std(axis=0, ddof=1) / math.sqrt(4000)
    assert np.all(np.abs(dq.mean(axis=0)[1:]) < 4 * se[1:])


def test_mode_correction_matches_series():
    bath = env.OhmicBath(gamma=1.0, cutoff=10.0)
    est = sto.mc_mode_correction(2.0, 5.0, bath, M=2000, seed=0)
    _, delta = cr.relative_correction_series(2.0, 5.0, bath)
    assert abs(est.relative - delta[-1]) < 3 * est.stderr


def test_minimum_realizations():
    with pytest.raises(ValueError):
        sto.mc_correlation(XS, PROFILE, M=10, t=20.0)
    with pytest.raises(ValueError):
        sto.mc_mode_correction(1.0, 1.0, BATH, M=99, seed=0)


@pytest.fixture(scope="module")
def chars20():
    return cr.CharacteristicData.build(-10.0, XS, 20.0, PROFILE)


def test_mc_agrees_with_closed(chars20):
    mc = sto.mc_correlation(XS, PROFILE, 0.0, M=2000, seed=0, t=20.0, chars=chars20)
    closed = cr.closed_correlation(XS, PROFILE, 0.0, t=20.0, chars=chars20,
                                   check_convergence=False)
    ok, all_ok = sto.agreement(mc, closed)
    assert all_ok, np.flatnonzero(~ok)
    assert mc.grid.regions == closed.regions


def test_mc_error_shrinks_as_sqrt_M(chars20):
    a = sto.mc_correlation(XS, PROFILE, 0.0, M=1000, seed=1, t=20.0, chars=chars20)
    b = sto.mc_correlation(XS, PROFILE, 0.0, M=2000, seed=1, t=20.0, chars=chars20)
    ratio = np.mean(a.stderr / b.stderr)
    assert ratio == pytest.approx(math.sqrt(2), rel=0.2)


def test_mc_bitwise_reproducible_across_threads(chars20):
    a = sto.mc_correlation(XS, PROFILE, 0.0, M=300, seed=9, t=20.0, chars=chars20)
    b = sto.mc_correlation(XS, PROFILE, 0.0, M=300, seed=9, t=20.0, chars=chars20,
                           threads=4)
    assert np.array_equal(a.grid.values, b.grid.values)
    assert np.array_equal(a.stderr, b.stderr)


def test_insufficient_statistics_flag(chars20):
    mc = sto.mc_correlation(XS, PROFILE, 0.0, M=100, seed=0, t=20.0, chars=chars20)
    assert mc.insufficient_statistics
