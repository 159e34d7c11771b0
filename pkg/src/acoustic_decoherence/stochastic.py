"""Monte Carlo cross-checks: noise sampling, retarded Green function,
perturbative Langevin solutions and ensemble correlations.

Random streams are derived per realization from ``SeedSequence([seed, i])``
and partial sums are merged in realization order, so results depend only
on ``(seed, M, grid)`` and never on the number of worker threads.

Stochastic fields are represented in the plane-wave mode basis of the
correlation window.  Because the noise is local in space it is also white
across modes, so each mode (site) receives an independent time series.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import environment as env
from .collapse import CollapseProfile, propagate
from .correlations import (CharacteristicData, CorrelationGrid, ModeGrid,
                           correlation_from_characteristics, default_modes,
                           mode_coefficients, mode_kernel)
from .errors import CovarianceNotPSD

MIN_REALIZATIONS = 100
CLIP_RELATIVE = 1e-10
INSUFFICIENT_RATIO = 0.2


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


# ---------------------------------------------------------------------------
# noise

def noise_covariance(times, bath: env.OhmicBath, hbar: float = 1.0) -> np.ndarray:
    """``hbar gamma^2 N(t_i, t_j)`` on a time grid."""
    times = np.asarray(times, dtype=float)
    lags = np.abs(times[:, None] - times[None, :])
    return hbar * bath.gamma ** 2 * env.noise_kernel_closed(lags, bath)


def noise_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a covariance, clipping round-off negatives.

    Eigenvalues below ``-1e-10 ||C||`` raise :class:`CovarianceNotPSD`.
    """
    w, v = np.linalg.eigh(cov)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if scale == 0.0:
        return np.zeros_like(cov)
    if w.min() < -CLIP_RELATIVE * scale:
        raise CovarianceNotPSD(
            f"eigenvalue {w.min():.3g} below clip threshold {-CLIP_RELATIVE * scale:.3g}")
    if w.min() < 0:
        warnings.warn(f"clipping {int(np.sum(w < 0))} negative eigenvalues", RuntimeWarning,
                      stacklevel=2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


@dataclass(frozen=True)
class NoiseRealization:
    times: np.ndarray
    xi: np.ndarray        # shape (n_sites, n_times)
    seed: int
    dx: float = 1.0


def sample_noise(times, bath: env.OhmicBath, seed: int, n_sites: int = 1,
                 dx: float = 1.0, hbar: float = 1.0, factor=None) -> NoiseRealization:
    """Gaussian force with ``<xi(x,t) xi(x',t')> = hbar gamma^2 N(t,t') delta_xx' / dx``.

    ``factor`` may carry a precomputed :func:`noise_factor` for ``times``.
    """
    times = np.asarray(times, dtype=float)
    if factor is None:
        # factor the unit-coupling covariance so xi is exactly linear in gamma
        factor = bath.gamma * noise_factor(noise_covariance(times, bath.with_(gamma=1.0), hbar))
    z = _stream(seed, 0).standard_normal((n_sites, times.size))
    return NoiseRealization(times, (z @ factor) / math.sqrt(dx), int(seed), dx)


# ---------------------------------------------------------------------------
# Green function

def green_retarded(source, field, profile: CollapseProfile) -> float:
    """Retarded Green function of the acoustic wave operator.

    ``source`` and ``field`` are ``(t, x)`` pairs.  In 1+1 dimensions the
    operator is conformally flat, so the value is 1/2 between the left- and
    right-moving characteristics leaving the source and 0 elsewhere.
    """
    (ts, xs), (tf, xf) = source, field
    if tf <= ts:
        return 0.0
    left = propagate(xs, ts, tf, profile, -1.0)
    right = propagate(xs, ts, tf, profile, +1.0)
    return 0.5 if left < xf < right else 0.0


# ---------------------------------------------------------------------------
# single-mode Langevin problem

@dataclass(frozen=True)
class ModeInitial:
    """Initial amplitude ``q(0) = A`` and momentum ``p(0) = B`` per realization."""

    A: np.ndarray
    B: np.ndarray


def thermal_initial(omega, temperature, size, rng, hbar=1.0) -> ModeInitial:
    """``Var A = hbar coth / (2 omega)``, ``Var B = hbar omega coth / 2``."""
    coth = 1.0 if temperature == 0 else float(env.thermal_weight(omega, 1.0 / temperature))
    sa = math.sqrt(hbar * coth / (2.0 * omega))
    return ModeInitial(sa * rng.standard_normal(size), omega * sa * rng.standard_normal(size))


def _trap_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    if n == 1:
        w[:] = 0.0
    return w


def dissipation_convolution(times, f, cutoff):
    """``int_0^s D(s - s') f(s') ds'`` on a uniform grid (trapezoid)."""
    times = np.asarray(times, dtype=float)
    h = times[1] - times[0]
    dk = env.dissipation_kernel_closed(times, cutoff)
    out = np.empty_like(f, dtype=float)
    for i in range(times.size):
        out[..., i] = (f[..., :i + 1] * dk[i::-1]) @ _trap_weights(i + 1, h) \
            if f.ndim > 1 else np.dot(f[:i + 1] * dk[i::-1], _trap_weights(i + 1, h))
    return out


def langevin_realization(noise: NoiseRealization, initial: ModeInitial, omega: float,
                         bath: env.OhmicBath, renormalize: bool = True):
    """First-order solution ``q = q_o + G (xi + gamma^2 (D q_o - Lambda q_o))``.

    ``noise.xi`` rows pair with the entries of ``initial``; returns
    ``(q_o, p_o, dq, dp)`` on ``noise.times``, each of shape
    ``(n_realizations, n_times)``.  ``G(t) = sin(omega t) / omega``.
    """
    t = noise.times
    h = t[1] - t[0]
    c, s = np.cos(omega * t), np.sin(omega * t)
    A, B = np.atleast_1d(initial.A)[:, None], np.atleast_1d(initial.B)[:, None]
    q_o = A * c + (B / omega) * s
    p_o = -A * omega * s + B * c
    dc = dissipation_convolution(t, c, bath.cutoff)
    ds = dissipation_convolution(t, s, bath.cutoff)
    if renormalize:
        dc, ds = dc - bath.cutoff * c, ds - bath.cutoff * s
    force = noise.xi + bath.gamma ** 2 * (A * dc + (B / omega) * ds)
    dq = np.empty_like(force)
    dp = np.empty_like(force)
    for i in range(t.size):
        w = _trap_weights(i + 1, h)
        lag = omega * (t[i] - t[:i + 1])
        dq[:, i] = (force[:, :i + 1] * np.sin(lag)) @ w / omega
        dp[:, i] = (force[:, :i + 1] * np.cos(lag)) @ w
    return q_o, p_o, dq, dp


@dataclass(frozen=True)
class ModeCorrectionEstimate:
    omega: float
    t: float
    relative: float      # (C_o - C_c) / C_c per unit gamma^2
    stderr: float
    M: int


def mc_mode_correction(omega: float, t: float, bath: env.OhmicBath, M: int, seed: int,
                       points_per_cutoff: float = 20.0, chunk: int = 500,
                       hbar: float = 1.0) -> ModeCorrectionEstimate:
    """Ensemble estimate of the first-order relative change of ``<p(t)^2>``.

    The estimator ``2 p_o dp + dp_noise^2`` is exactly first order in
    ``gamma^2``; the bath is evaluated at ``gamma = 1`` so the result is per
    unit ``gamma^2``.
    """
    _check_M(M)
    unit = bath.with_(gamma=1.0)
    h = min(1.0 / (points_per_cutoff * bath.cutoff), 0.05 / omega)
    n = int(math.ceil(t / h))
    times = np.linspace(0.0, t, n + 1)
    h = times[1] - times[0]
    factor = noise_factor(noise_covariance(times, unit, hbar))
    c, s = np.cos(omega * times), np.sin(omega * times)
    dc = dissipation_convolution(times, c, bath.cutoff) - bath.cutoff * c
    ds = dissipation_convolution(times, s, bath.cutoff) - bath.cutoff * s
    kern = np.cos(omega * (t - times)) * _trap_weights(times.size, h)
    g_c, g_s = float(dc @ kern), float(ds @ kern)
    coth = 1.0 if bath.temperature == 0 else float(env.thermal_weight(omega, bath.beta_th))
    ck = hbar * omega * coth / 2.0
    vals = np.empty(M)
    for lo in range(0, M, chunk):
        idx = range(lo, min(lo + chunk, M))
        z = np.stack([_stream(seed, i).standard_normal(times.size + 2) for i in idx])
        xi = z[:, :-2] @ factor
        sa = math.sqrt(hbar * coth / (2.0 * omega))
        A, B = sa * z[:, -2], omega * sa * z[:, -1]
        p_o = -A * omega * math.sin(omega * t) + B * math.cos(omega * t)
        dp_noise = xi @ kern
        dp_diss = A * g_c + (B / omega) * g_s
        vals[lo:lo + len(idx)] = (2.0 * p_o * (dp_noise + dp_diss) + dp_noise ** 2) / ck
    return ModeCorrectionEstimate(omega, t, float(vals.mean()),
                                  float(vals.std(ddof=1) / math.sqrt(M)), M)


# ---------------------------------------------------------------------------
# field correlations

def _check_M(M):
    if M < MIN_REALIZATIONS:
        raise ValueError(f"need at least {MIN_REALIZATIONS} realizations, got {M}")


@dataclass
class MCCorrelation:
    grid: CorrelationGrid
    stderr: np.ndarray
    M: int
    seed: int
    insufficient_statistics: bool


def mc_correlation(xs, profile: CollapseProfile, temperature: float = 0.0,
                   M: int = 10_000, seed: int = 0, x1: float | None = None,
                   t: float | None = None, modes: ModeGrid | None = None,
                   chars: CharacteristicData | None = None, threads: int = 1,
                   chunk: int = 64) -> MCCorrelation:
    """Ensemble estimate of ``<Pi(x1, t) Pi(x, t)>`` for the closed system.

    Each realization draws independent Gaussian cosine/sine amplitudes per
    mode with variances matching the initial thermal state, transports them
    along the characteristics and multiplies the momentum fields.
    """
    _check_M(M)
    x1 = -10.0 * profile.a if x1 is None else x1
    t = 100.0 * profile.tau_c if t is None else t
    modes = modes or default_modes(profile, t)
    if chars is None:
        chars = CharacteristicData.build(x1, xs, t, profile)
    k, amp = mode_coefficients(temperature, modes)
    root = np.sqrt(amp)
    x0 = np.concatenate([[chars.x0_1], chars.x0s])
    jac = np.concatenate([[chars.jac_1], chars.jac])
    cos_m = np.cos(np.outer(x0, k)) * root
    sin_m = np.sin(np.outer(x0, k)) * root

    def run(lo):
        hi = min(lo + chunk, M)
        z = np.stack([_stream(seed, i).standard_normal(2 * k.size) for i in range(lo, hi)],
                     axis=1)
        pi = jac[:, None] * (cos_m @ z[:k.size] + sin_m @ z[k.size:])
        prod = pi[0] * pi[1:]
        return prod.sum(axis=1), (prod ** 2).sum(axis=1)

    starts = list(range(0, M, chunk))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(lo) for lo in starts]
    s1 = np.zeros(chars.xs.size)
    s2 = np.zeros(chars.xs.size)
    for a, b in parts:
        s1 += a
        s2 += b
    mean = s1 / M
    var = np.maximum(s2 / M - mean ** 2, 0.0) * M / (M - 1)
    err = np.sqrt(var / M)

    ref = correlation_from_characteristics(chars, temperature, modes, profile.a)
    flat = mode_kernel(chars.x1 - chars.xs, temperature, modes)
    grid = CorrelationGrid(chars.x1, chars.xs, t, temperature, mean, mean - flat,
                           ref.regions, "closed", flat, chars.x0s, chars.jac, err)
    i_peak = int(np.argmax(np.abs(ref.signal)))
    weak = err[i_peak] > INSUFFICIENT_RATIO * abs(mean[i_peak])
    return MCCorrelation(grid, err, M, int(seed), bool(weak))


def agreement(mc: MCCorrelation, closed: CorrelationGrid, n_sigma: float = 3.0):
    """Per-point ``|MC - closed| <= n_sigma * stderr`` and the overall verdict."""
    ok = np.abs(mc.grid.values - closed.values) <= n_sigma * mc.stderr
    return ok, bool(ok.all())
