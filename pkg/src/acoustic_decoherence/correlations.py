"""Momentum-momentum correlations of left-moving phonons.

Left-moving modes are transported along characteristics, so at time ``t``

    Pi_k(x, t) = i k J(x) exp(i k x0(x, t)) / sqrt(4 pi |k|),   J = dx0/dx.

The closed-system correlation of the initially thermal field is the mode sum

    C(x1, x) = sum_k w_k coth(beta k / 2) Re[Pi_k(x1) Pi_k(x)^*]
             = J(x1) J(x) S(x0(x1) - x0(x)),

with ``S(D) = sum_k w_k k coth(beta k/2) e^{-k/K} cos(k D) / (4 pi)``.  The
wavenumbers ``k_j = j pi / X`` use trapezoid weights (the ``k = 0`` term is
kept as its limit, plus an endpoint correction) and a smooth ``exp(-k/K)`` regulator at the lattice scale
``K = pi / dx``.

The open-system correction is first order in ``gamma^2`` and evaluated per
mode for the amplitude oscillator driven by the bath noise and damped by the
(renormalized) dissipation kernel; see :func:`relative_correction_series`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import environment as env
from .collapse import (CollapseProfile, Region, characteristic_map,
                       mode_normalization, separatrix, trace_back_with_jacobian)
from .errors import DegenerateMode, NonConvergentSum

DEGENERATE_FLOOR = 1e-300


@dataclass(frozen=True)
class ModeGrid:
    """Wavenumber grid ``k_j = j dk`` with a smooth cutoff ``exp(-k/k_cut)``."""

    dk: float
    k_cut: float

    @classmethod
    def for_window(cls, window: float, k_cut: float) -> "ModeGrid":
        return cls(dk=math.pi / window, k_cut=k_cut)

    def refined(self) -> "ModeGrid":
        return ModeGrid(dk=0.5 * self.dk, k_cut=self.k_cut)

    @property
    def k(self) -> np.ndarray:
        n = int(math.ceil(40.0 * self.k_cut / self.dk))
        return np.arange(n + 1) * self.dk

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.k.shape, self.dk) * np.exp(-self.k / self.k_cut)
        w[0] *= 0.5
        return w


def _k_coth(k, temperature):
    """``k coth(k / 2T)`` with its ``k -> 0`` limit ``2T``."""
    k = np.asarray(k, dtype=float)
    if temperature == 0:
        return k
    beta = 1.0 / temperature
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.where(k > 0, k * env.thermal_weight(k, beta), 2.0 / beta)


def mode_coefficients(temperature, modes: ModeGrid):
    """Cosine-series coefficients ``a_j >= 0`` with ``S(D) = sum_j a_j cos(k_j D)``.

    The summand is not even in ``k`` (``|k|`` at ``T = 0``, the regulator
    otherwise), so the leading Euler-Maclaurin endpoint term
    ``dk^2 f'(0) / 12`` is folded into ``a_0``.
    """
    k = modes.k
    a = modes.weights * _k_coth(k, temperature) / (4.0 * math.pi)
    slope0 = 1.0 if temperature == 0 else -2.0 * temperature / modes.k_cut
    a[0] += modes.dk ** 2 * slope0 / (12.0 * 4.0 * math.pi)
    return k, a


def mode_kernel(delta, temperature, modes: ModeGrid, chunk=256):
    """``S(delta)``: flat-space equal-time Pi-Pi correlation for separation ``delta``."""
    d = np.atleast_1d(np.asarray(delta, dtype=float))
    k, amp = mode_coefficients(temperature, modes)
    out = np.empty_like(d)
    for i in range(0, d.size, chunk):
        out[i:i + chunk] = np.cos(np.outer(d[i:i + chunk], k)) @ amp
    return out if np.ndim(delta) else float(out[0])


def vacuum_kernel_continuum(delta, k_cut):
    """Continuum limit of :func:`mode_kernel` at ``T = 0``:
    ``(1/K^2 - D^2) / (4 pi (1/K^2 + D^2)^2)``."""
    d2 = np.asarray(delta, dtype=float) ** 2
    e2 = 1.0 / k_cut ** 2
    return (e2 - d2) / (4.0 * math.pi * (e2 + d2) ** 2)


def momentum_minus(x, t, k, profile: CollapseProfile):
    """``Pi_k(x, t) = d_x Psi_k`` via the characteristic Jacobian."""
    x0, jac = trace_back_with_jacobian(x, t, profile)
    k = np.asarray(k, dtype=float)
    # k / sqrt(4 pi |k|) written so that k = 0 gives 0
    amp = np.sign(k) * np.sqrt(np.abs(k) / (4.0 * math.pi))
    return 1j * amp * jac * np.exp(1j * k * x0)


@dataclass
class CorrelationGrid:
    x1: float
    xs: np.ndarray
    t: float
    temperature: float
    values: np.ndarray            # raw C(x1, x)
    signal: np.ndarray            # raw minus the flat-space reference
    regions: list
    kind: str = "closed"
    flat: np.ndarray = field(default=None, repr=False)
    x0s: np.ndarray = field(default=None, repr=False)
    jac: np.ndarray = field(default=None, repr=False)
    stderr: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.values) != len(self.xs) or len(self.regions) != len(self.xs):
            raise ValueError("grid arrays must match xs")

    def records(self, a: float = 1.0):
        for x, reg, raw, sig in zip(self.xs, self.regions, self.values, self.signal):
            yield {"x/a": x / a, "region": reg.value, "C_raw": raw, "C_signal": sig}


@dataclass(frozen=True)
class CharacteristicData:
    """Traced-back start points and Jacobians, reusable across temperatures."""

    x1: float
    xs: np.ndarray
    t: float
    x0_1: float
    jac_1: float
    x0s: np.ndarray
    jac: np.ndarray
    boundary: float

    @classmethod
    def build(cls, x1, xs, t, profile):
        xs = np.asarray(xs, dtype=float)
        x0_1, jac_1 = trace_back_with_jacobian(x1, t, profile)
        x0s, jac = characteristic_map(xs, t, profile)
        return cls(float(x1), xs, float(t), x0_1, jac_1, x0s, jac,
                   separatrix(t, profile))

    def regions(self, a):
        return [Region.HAWKING if x0 < a else Region.TRIVIAL_FLAT for x0 in self.x0s]


def default_modes(profile: CollapseProfile, t: float, dx_over_a=0.1,
                  window_factor=20.0) -> ModeGrid:
    window = window_factor * profile.a + t
    return ModeGrid.for_window(window, math.pi / (dx_over_a * profile.a))


def correlation_from_characteristics(chars: CharacteristicData, temperature,
                                     modes: ModeGrid, a: float) -> CorrelationGrid:
    raw = chars.jac_1 * chars.jac * mode_kernel(chars.x0_1 - chars.x0s, temperature, modes)
    flat = mode_kernel(chars.x1 - chars.xs, temperature, modes)
    return CorrelationGrid(chars.x1, chars.xs, chars.t, temperature, raw, raw - flat,
                           chars.regions(a), "closed", flat, chars.x0s, chars.jac)


def closed_correlation(xs, profile: CollapseProfile, temperature: float = 0.0,
                       x1: float | None = None, t: float | None = None,
                       modes: ModeGrid | None = None, chars=None,
                       check_convergence: bool = True,
                       tolerance: float = 0.01) -> CorrelationGrid:
    """Closed-system ``<Pi(x1, t) Pi(x, t)>`` for the collapse profile.

    Defaults: ``x1 = -10 a`` and ``t = 100 tau_c``.  With
    ``check_convergence`` the peak height is recomputed on a mode grid of
    half the spacing and must agree within ``tolerance``.
    """
    x1 = -10.0 * profile.a if x1 is None else x1
    t = 100.0 * profile.tau_c if t is None else t
    modes = modes or default_modes(profile, t)
    if chars is None:
        chars = CharacteristicData.build(x1, xs, t, profile)
    grid = correlation_from_characteristics(chars, temperature, modes, profile.a)
    if check_convergence:
        fine = correlation_from_characteristics(chars, temperature, modes.refined(),
                                                profile.a)
        h0, h1 = peak_metrics(grid).peak_height, peak_metrics(fine).peak_height
        if h1 > 0 and abs(h0 - h1) > tolerance * h1:
            raise NonConvergentSum(
                f"peak height changed by {abs(h0 - h1) / h1:.2%} under k-grid doubling")
    return grid


@dataclass(frozen=True)
class PeakMetrics:
    peak_x: float
    peak_height: float
    fwhm: float
    present: bool
    background: float


def peak_metrics(grid: CorrelationGrid, exclusion: float = 2.0,
                 contrast: float = 3.0, floor: float = 1e-8) -> PeakMetrics:
    """Largest ``|signal|`` over the hawking-tagged points.

    Points within ``exclusion`` of ``x1`` (equal-point singularity) are
    skipped.  ``present`` needs the peak to exceed ``contrast`` times the
    median ``|signal|`` of all retained points and ``floor`` times the
    largest raw value (guards against round-off features).
    """
    xs = np.asarray(grid.xs)
    mag = np.abs(grid.signal)
    keep = np.abs(xs - grid.x1) >= exclusion
    hawk = keep & np.array([r is Region.HAWKING for r in grid.regions])
    if not hawk.any():
        return PeakMetrics(math.nan, 0.0, math.nan, False, float(np.median(mag[keep])) if keep.any() else 0.0)
    idx = np.flatnonzero(hawk)[np.argmax(mag[hawk])]
    height = float(mag[idx])
    background = float(np.median(mag[keep]))
    scale = float(np.max(np.abs(grid.values[keep]))) if keep.any() else 0.0
    present = height > contrast * background and height > floor * scale and height > 0
    return PeakMetrics(float(xs[idx]), height, _fwhm(xs, mag, idx), bool(present),
                       background)


def _fwhm(xs, mag, idx):
    half = 0.5 * mag[idx]
    lo = idx
    while lo > 0 and mag[lo - 1] >= half:
        lo -= 1
    hi = idx
    while hi < len(xs) - 1 and mag[hi + 1] >= half:
        hi += 1

    def cross(i, j):
        if mag[i] == mag[j]:
            return xs[i]
        return xs[i] + (half - mag[i]) * (xs[j] - xs[i]) / (mag[j] - mag[i])

    left = cross(lo - 1, lo) if lo > 0 else xs[lo]
    right = cross(hi + 1, hi) if hi < len(xs) - 1 else xs[hi]
    return float(abs(right - left))


# ---------------------------------------------------------------------------
# open system, per mode

def _time_steps(t_max, omega, cutoff, points_per_cutoff):
    h = min(1.0 / (points_per_cutoff * cutoff), 0.05 / max(omega, 1e-300))
    return int(math.ceil(t_max / h))


def _causal_conv(kernel, f, h):
    """Trapezoid approximation of ``int_0^s kernel(s - s') f(s') ds'`` on a grid."""
    full = signal.fftconvolve(kernel, f)[: len(f)]
    return h * (full - 0.5 * kernel[0] * f - 0.5 * kernel * f[0])


def _cumtrapz(y, h):
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * h * (y[1:] + y[:-1]), out=out[1:])
    return out


def relative_correction_series(k: float, t_max: float, bath: env.OhmicBath,
                               temperature: float | None = None,
                               renormalize: bool = True,
                               points_per_cutoff: float = 5.0,
                               extrapolate: bool = True):
    """First-order relative change ``(C_o - C_c)/C_c`` of one mode's
    momentum variance on a uniform time grid ``[0, t_max]``.

    The mode amplitude obeys ``q'' + k^2 q - gamma^2 (D * q) = xi`` with
    ``<xi xi> = hbar gamma^2 N`` and a thermal initial state at
    ``temperature`` (defaults to the bath temperature).  The sign makes the
    memory term damp the mode (rate ``gamma^2 pi / 4`` in amplitude).  With
    ``renormalize`` the cutoff-linear frequency shift ``gamma^2 Lambda`` is
    removed by a counterterm.  Returns ``(times, delta)``.

    Noise and damping give ``delta`` a secular part ``gamma^2 pi t / 2``
    on top of a cutoff-scale initial slip ``~ (4 gamma^2/k) ln(Lambda t)``.
    The time quadrature is second order; ``extrapolate`` combines grids
    ``h`` and ``h/2`` by Richardson extrapolation.
    """
    omega = abs(k)
    if omega == 0:
        raise DegenerateMode("k = 0 carries no momentum")
    temperature = bath.temperature if temperature is None else temperature
    n = _time_steps(t_max, omega, bath.cutoff, points_per_cutoff)
    if not extrapolate:
        times = np.linspace(0.0, t_max, n + 1)
        return times, _delta_on_grid(omega, times, bath, temperature, renormalize)
    fine = np.linspace(0.0, t_max, 2 * n + 1)
    d_fine = _delta_on_grid(omega, fine, bath, temperature, renormalize)
    d_coarse = _delta_on_grid(omega, fine[::2], bath, temperature, renormalize)
    return fine[::2], (4.0 * d_fine[::2] - d_coarse) / 3.0


def _delta_on_grid(omega, times, bath, temperature, renormalize):
    h = times[1] - times[0]
    c, s = np.cos(omega * times), np.sin(omega * times)

    nk = env.noise_kernel_closed(times, bath)
    nc, ns = _causal_conv(nk, c, h), _causal_conv(nk, s, h)
    icc = _cumtrapz(2.0 * c * nc, h)
    iss = _cumtrapz(2.0 * s * ns, h)
    ics = _cumtrapz(c * ns + s * nc, h)
    noise = c * c * icc + 2.0 * c * s * ics + s * s * iss
    del nk, nc, ns, icc, iss, ics

    dk = env.dissipation_kernel_closed(times, bath.cutoff)
    fc, fs = _causal_conv(dk, c, h), _causal_conv(dk, s, h)
    if renormalize:
        fc, fs = fc - bath.cutoff * c, fs - bath.cutoff * s

    def back(f):
        # int_0^t cos(w (t - s)) f(s) ds
        return c * _cumtrapz(c * f, h) + s * _cumtrapz(s * f, h)

    pc, ps = back(fc), back(fs)
    coth_sys = 1.0 if temperature == 0 else float(env.thermal_weight(omega, 1.0 / temperature))
    g2 = bath.gamma ** 2
    return (2.0 * g2 / (omega * coth_sys)) * noise + (2.0 * g2 / omega) * (-s * pc + c * ps)


def closed_mode_correlation(k, x1, x, t, profile, temperature=0.0):
    """Single-mode ``C_c(k) = coth(beta k/2) Re[Pi_k(x1) Pi_k(x)^*]``."""
    p1 = momentum_minus(x1, t, k, profile)
    p2 = momentum_minus(x, t, k, profile)
    coth = 1.0 if temperature == 0 else float(env.thermal_weight(abs(k), 1.0 / temperature))
    return float(coth * np.real(p1 * np.conj(p2)))


def open_correction(k, t, profile, bath, x1=None, x=None, renormalize=True):
    """``(C_c(k), C_o(k))`` at the pair ``(x1, x)`` (default ``(-10a, 2a)``)."""
    x1 = -10.0 * profile.a if x1 is None else x1
    x = 2.0 * profile.a if x is None else x
    cc = closed_mode_correlation(k, x1, x, t, profile, bath.temperature)
    if t == 0 or bath.gamma == 0:
        return cc, cc
    _, delta = relative_correction_series(k, t, bath, renormalize=renormalize)
    return cc, cc * (1.0 + delta[-1])


def relative_environment_contribution(k, t, profile, bath, x1=None, x=None,
                                      renormalize=True) -> float:
    """``e_r = |(C_c(k) - C_o(k)) / C_c(k)|``."""
    cc, co = open_correction(k, t, profile, bath, x1, x, renormalize)
    if abs(cc) < DEGENERATE_FLOOR:
        raise DegenerateMode(f"C_c(k={k:g}) = {cc:g} at t = {t:g}")
    return abs((cc - co) / cc)


def er_series(k, times, bath, renormalize=True):
    """``e_r(k, t)`` sampled at ``times`` from one fine-grid evaluation.

    The spatial factor of the single-mode correlation cancels in the ratio.
    """
    times = np.asarray(times, dtype=float)
    grid, delta = relative_correction_series(k, float(times.max()), bath,
                                             renormalize=renormalize)
    return np.abs(np.interp(times, grid, delta))


def crossing_time(times, er, level=0.5):
    """First time at which the series reaches ``level`` (log-linear interpolation)."""
    times, er = np.asarray(times), np.asarray(er)
    above = np.flatnonzero(er >= level)
    if above.size == 0:
        return None
    i = above[0]
    if i == 0:
        return float(times[0])
    t0, t1, e0, e1 = times[i - 1], times[i], er[i - 1], er[i]
    frac = (level - e0) / (e1 - e0)
    return float(math.exp(math.log(t0) + frac * (math.log(t1) - math.log(t0))))


def default_er_times(tau_c: float = 1.0, t_min=0.1, t_max=2.0e4, per_decade=8):
    """Log-spaced sample times, ``per_decade`` points per decade (in units of ``tau_c``)."""
    n = int(round(per_decade * math.log10(t_max / t_min))) + 1
    return tau_c * np.geomspace(t_min, t_max, n)


@dataclass(frozen=True)
class ErRow:
    t: float
    e_r: float
    error: str = ""


def er_table(k, times, profile: CollapseProfile, bath, x1=None, x=None,
             renormalize=True) -> list[ErRow]:
    """``e_r(k, t)`` rows at the pair ``(x1, x)`` (default ``(-10a, 2a)``).

    Times where the closed single-mode correlation vanishes carry a
    :class:`DegenerateMode` message instead of a value.
    """
    x1 = -10.0 * profile.a if x1 is None else x1
    x = 2.0 * profile.a if x is None else x
    times = np.asarray(times, dtype=float)
    if bath.gamma == 0:
        values = np.zeros_like(times)
    else:
        values = er_series(k, times, bath, renormalize)
    rows = []
    for t, e in zip(times, values):
        cc = closed_mode_correlation(k, x1, x, t, profile, bath.temperature)
        if abs(cc) < DEGENERATE_FLOOR:
            rows.append(ErRow(float(t), math.nan, f"DegenerateMode: C_c = {cc:g}"))
        else:
            rows.append(ErRow(float(t), float(e)))
    return rows
