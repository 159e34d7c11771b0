"""Ohmic quantum-Brownian-motion bath: kernels and the diffusion coefficient.

All kernels are returned per unit ``gamma**2``; the coupling is reinserted
by :mod:`acoustic_decoherence.decoherence`.  The ohmic spectral ratio
``gamma_tilde**2 / (nu I(nu)) = gamma**2 * nu`` is regularized by a hard
cutoff ``Lambda``:

    N(s) = int_0^Lambda dnu  nu coth(beta nu / 2) cos(nu s)
    D(s) = Theta(s) int_0^Lambda dnu  nu sin(nu s)

Temperatures are expressed as frequencies (``k_B T / hbar``), so
``beta_th = 1 / temperature``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import QuadratureNonConvergent

EULER_GAMMA = float(np.euler_gamma)

# beyond this many thermal lengths the Bose excess above the cutoff is < e^-50
_BETA_CUTOFF_SAFE = 50.0
# pi*s/beta beyond which csch^2 is negligible next to 1/s^2 (4 y^2 e^{-2y} < 1e-18)
_CSCH_DEAD = 25.0

_GL_HI = np.polynomial.legendre.leggauss(20)
_GL_LO = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class OhmicBath:
    """Bath parameters.  ``gamma`` is the coupling entering ``Gamma``."""

    gamma: float
    temperature: float = 0.0
    cutoff: float = 1e6
    zeta: float | None = None

    def __post_init__(self):
        if self.gamma < 0 or self.temperature < 0 or not self.cutoff > 0:
            raise ValueError("need gamma >= 0, temperature >= 0, cutoff > 0")
        if self.zeta is not None and self.zeta < 0:
            raise ValueError("zeta must be >= 0")

    @property
    def beta_th(self) -> float:
        return math.inf if self.temperature == 0 else 1.0 / self.temperature

    @classmethod
    def from_zeta(cls, zeta, params, profile, temperature=0.0, cutoff=1e6):
        return cls(gamma=coupling_from_zeta(zeta, params, profile),
                   temperature=temperature, cutoff=cutoff, zeta=zeta)

    def with_(self, **changes) -> "OhmicBath":
        fields = dict(gamma=self.gamma, temperature=self.temperature,
                      cutoff=self.cutoff, zeta=self.zeta)
        fields.update(changes)
        return OhmicBath(**fields)


def _velocity_span(profile) -> float:
    return float(profile.v_max - profile.v_min)


def coupling_from_zeta(zeta: float, params, profile) -> float:
    """``gamma = zeta * sqrt(2 rho / hbar) * (v_max - v_min)``."""
    if zeta < 0:
        raise ValueError("zeta must be >= 0")
    return zeta * math.sqrt(2.0 * params.rho / params.hbar) * _velocity_span(profile)


def spectral_ratio(nu):
    """``gamma_tilde^2 / (nu I(nu))`` per unit ``gamma^2``.

    Only the ohmic case ships; other environments would replace this.
    """
    return nu


def thermal_weight(nu, beta_th):
    """``coth(beta nu / 2)``, equal to 1 at zero temperature."""
    nu = np.asarray(nu, dtype=float)
    if math.isinf(beta_th):
        return np.ones_like(nu)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = 0.5 * beta_th * nu
        return np.where(x > 20.0, 1.0 + 2.0 * np.exp(-2.0 * x),
                        1.0 + 2.0 / np.expm1(2.0 * x))


def _noise_density(nu, beta_th):
    """``spectral_ratio(nu) * coth(beta nu/2)``, finite at nu = 0."""
    nu = np.asarray(nu, dtype=float)
    if math.isinf(beta_th):
        return spectral_ratio(nu)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        excess = np.where(nu > 0, 2.0 * nu / np.expm1(beta_th * nu), 2.0 / beta_th)
    return spectral_ratio(nu) + excess


# ---------------------------------------------------------------------------
# oscillatory quadrature over nu

def _panel_edges(upper, s):
    """Panel edges on ``[0, upper]``: zeros of cos/sin(nu s) once the phase is large."""
    phase = upper * abs(s)
    if phase <= 50.0:
        return np.linspace(0.0, upper, 9)
    step = 0.5 * math.pi / abs(s)
    n = int(math.ceil(upper / step))
    return np.minimum(np.arange(n + 1) * step, upper)


def _gl_panels(f, edges):
    """Gauss-Legendre over panels; returns (value, error estimate)."""
    a, b = edges[:-1, None], edges[1:, None]
    half, mid = 0.5 * (b - a), 0.5 * (b + a)
    hi = (f(mid + half * _GL_HI[0]) * _GL_HI[1]) * half
    lo = (f(mid + half * _GL_LO[0]) * _GL_LO[1]) * half
    val = math.fsum(hi.ravel())
    err = abs(val - math.fsum(lo.ravel()))
    return val, err


def _thermal_edges(upper, beta_th):
    """Extra edges resolving the Bose factor on the scale ``1/beta``."""
    if math.isinf(beta_th):
        return np.empty(0)
    marks = np.ldexp(1.0, np.arange(-6, 8)) / beta_th
    return marks[marks < upper]


def _spectral_cos_sin(s, bath, trig, density, rtol=1e-6):
    s = float(s)
    edges = np.union1d(_panel_edges(bath.cutoff, s),
                       _thermal_edges(bath.cutoff, bath.beta_th))
    f = lambda nu: density(nu) * trig(nu * s)
    val, err = _gl_panels(f, edges)
    scale = max(abs(val), _gl_panels(lambda nu: np.abs(density(nu)), edges)[0]
                / max(1.0, bath.cutoff * abs(s)))
    if err > rtol * scale and err > 1e-14 * bath.cutoff ** 2:
        edges = np.unique(np.concatenate([edges, 0.5 * (edges[:-1] + edges[1:])]))
        val, err = _gl_panels(f, edges)
        if err > rtol * scale and err > 1e-14 * bath.cutoff ** 2:
            raise QuadratureNonConvergent(
                f"kernel quadrature at s={s:g}: error {err:.3g} vs value {val:.3g}")
    return val


def noise_kernel(t, tprime, bath: OhmicBath):
    """Noise kernel ``N(t, t')`` per unit ``gamma^2`` by direct quadrature."""
    s = np.asarray(t, dtype=float) - np.asarray(tprime, dtype=float)
    dens = lambda nu: _noise_density(nu, bath.beta_th)
    out = np.vectorize(lambda si: _spectral_cos_sin(si, bath, np.cos, dens))(s)
    return out if out.ndim else float(out)


def dissipation_kernel(t, tprime, bath: OhmicBath):
    """Dissipation kernel ``D(t, t')`` per unit ``gamma^2``; zero for ``t < t'``."""
    s = np.asarray(t, dtype=float) - np.asarray(tprime, dtype=float)

    def one(si):
        if si <= 0.0:
            return 0.0
        return _spectral_cos_sin(si, bath, np.sin, spectral_ratio)

    out = np.vectorize(one)(s)
    return out if out.ndim else float(out)


def noise_kernel_vacuum(s, cutoff):
    """Closed form of the zero-temperature noise kernel,
    ``(L s sin(L s) + cos(L s) - 1) / s^2``."""
    s = np.abs(np.asarray(s, dtype=float))
    z = cutoff * s
    small = z < 1e-3
    zs = np.where(small, 1.0, z)
    direct = (zs * np.sin(zs) + np.cos(zs) - 1.0) / zs ** 2
    series = 0.5 - z ** 2 / 8.0 + z ** 4 / 144.0
    out = cutoff ** 2 * np.where(small, series, direct)
    return out if out.ndim else float(out)


def dissipation_kernel_closed(s, cutoff):
    """Closed form ``Theta(s) (sin(L s) - L s cos(L s)) / s^2``."""
    s = np.asarray(s, dtype=float)
    z = cutoff * s
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    direct = (np.sin(zs) - zs * np.cos(zs)) / zs ** 2
    series = z / 3.0 - z ** 3 / 30.0
    out = np.where(s > 0, cutoff ** 2 * np.where(small, series, direct), 0.0)
    return out if out.ndim else float(out)


def thermal_noise_excess(s, beta_th):
    """``N_T(s) - N_0(s)`` for an infinite cutoff:
    ``1/s^2 - (pi/beta)^2 / sinh^2(pi s / beta)``."""
    s = np.abs(np.asarray(s, dtype=float))
    if math.isinf(beta_th):
        return np.zeros_like(s)
    k = math.pi / beta_th
    y = k * s
    small = y < 0.1
    ys = np.where(small, 1.0, y)
    e = np.exp(-2.0 * ys)
    csch2 = 4.0 * e / (1.0 - e) ** 2
    direct = 1.0 / ys ** 2 - csch2
    y2 = y * y
    series = 1.0 / 3.0 - y2 / 15.0 + 2.0 * y2 ** 2 / 189.0 - y2 ** 3 / 675.0
    out = k * k * np.where(small, series, direct)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# diffusion coefficient d(t) and its time integral

def _cin(z):
    """Entire cosine integral ``Cin(z) = int_0^z (1 - cos u)/u du``."""
    z = np.abs(np.asarray(z, dtype=float))
    small = z < 1e-3
    zs = np.where(small, 1.0, z)
    _, ci = special.sici(zs)
    return np.where(small, z * z / 4.0 - z ** 4 / 96.0, EULER_GAMMA + np.log(zs) - ci)


def _f2(u):
    """Odd antiderivative of ``(1 - cos u)/u^2``: ``Si(u) - (1 - cos u)/u``."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-4
    us = np.where(small, 1.0, u)
    si, _ = special.sici(us)
    return np.where(small, u / 2.0, si - (1.0 - np.cos(us)) / us)


def vacuum_diffusion(t, omega, cutoff):
    """Zero-temperature ``d(t)`` for the hard-cutoff ohmic bath, exact:

        cos(w t)(1 - cos(L t))/t + w Si(w t) + (w/2)(Si((L-w)t) - Si((L+w)t))
    """
    t = np.asarray(t, dtype=float)
    ts = np.where(t > 0, t, 1.0)
    si_w, _ = special.sici(omega * ts)
    si_m, _ = special.sici((cutoff - omega) * ts)
    si_p, _ = special.sici((cutoff + omega) * ts)
    val = (np.cos(omega * ts) * (1.0 - np.cos(cutoff * ts)) / ts
           + omega * si_w + 0.5 * omega * (si_m - si_p))
    out = np.where(t > 0, val, 0.0)
    return out if out.ndim else float(out)


def vacuum_diffusion_integral(T, omega, cutoff):
    """Zero-temperature ``int_0^T d(t) dt``, exact for the hard cutoff."""
    T = np.asarray(T, dtype=float)
    lm, lp, wt = abs(cutoff - omega) * T, (cutoff + omega) * T, omega * T
    logs = 0.5 * (_cin(lm) + _cin(lp) - 2.0 * _cin(wt))
    sines = 0.5 * wt * (2.0 * _f2(wt) + _f2((cutoff - omega) * T) - _f2(lp))
    out = np.where(T > 0, logs + sines, 0.0)
    return out if out.ndim else float(out)


def _thermal_split(beta_th):
    return _CSCH_DEAD * beta_th / math.pi


def _thermal_moments(T, omega, beta_th):
    """``A = int_0^T cos(w s) N_T(s) ds`` and ``B = int_0^T s cos(w s) N_T(s) ds``
    for the infinite-cutoff thermal excess."""
    s0 = _thermal_split(beta_th)
    head = min(T, s0)
    f = lambda s: thermal_noise_excess(s, beta_th)
    g = lambda s: s * thermal_noise_excess(s, beta_th)
    opts = dict(weight="cos", wvar=omega, limit=500, epsabs=0.0, epsrel=1e-10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        a, ea = integrate.quad(f, 0.0, head, **opts)
        b, eb = integrate.quad(g, 0.0, head, **opts)
    scale_a = (math.pi / beta_th) ** 2 * head
    if ea > 1e-6 * max(abs(a), 1e-8 * scale_a) or eb > 1e-6 * max(abs(b), 1e-8 * scale_a * head):
        raise QuadratureNonConvergent(
            f"thermal moments: error estimates {ea:.3g}, {eb:.3g}")
    if T > s0:
        si1, ci1 = special.sici(omega * s0)
        si2, ci2 = special.sici(omega * T)
        a += (math.cos(omega * s0) / s0 - math.cos(omega * T) / T
              - omega * (si2 - si1))
        b += ci2 - ci1
    return a, b


def _thermal_spectral(T, omega, bath, kind):
    """Fallback when the cutoff sits inside the thermal window:
    integrate the Bose excess against the exact time kernels over nu."""
    beta = bath.beta_th
    dens = lambda nu: _noise_density(nu, beta) - spectral_ratio(nu)
    if kind == "d":
        def kern(nu):
            return 0.5 * (T * np.sinc((nu - omega) * T / math.pi)
                          + T * np.sinc((nu + omega) * T / math.pi))
    else:
        def kern(nu):
            xm, xp = 0.5 * (nu - omega) * T, 0.5 * (nu + omega) * T
            return 0.25 * T * T * (np.sinc(xm / math.pi) ** 2
                                   + np.sinc(xp / math.pi) ** 2)
    width = min(0.25 * math.pi / max(T, 1e-300), bath.cutoff / 16.0)
    n = int(math.ceil(bath.cutoff / width))
    if n > 2_000_000:
        raise QuadratureNonConvergent(
            "thermal spectral quadrature needs too many panels; "
            "raise the cutoff or lower the temperature")
    edges = np.linspace(0.0, bath.cutoff, n + 1)
    val, err = _gl_panels(lambda nu: dens(nu) * kern(nu), edges)
    if err > 1e-6 * max(abs(val), 1e-300) and err > 1e-13:
        raise QuadratureNonConvergent(f"thermal spectral quadrature error {err:.3g}")
    return val


def _thermal_safe(bath):
    return bath.beta_th * bath.cutoff >= _BETA_CUTOFF_SAFE


def noise_kernel_closed(s, bath: OhmicBath):
    """Noise kernel at lag ``s`` from the closed forms.

    Zero-temperature hard-cutoff kernel plus the infinite-cutoff thermal
    excess; falls back to quadrature when ``beta Lambda`` is too small for
    that split.
    """
    n = noise_kernel_vacuum(s, bath.cutoff)
    if bath.temperature > 0:
        if _thermal_safe(bath):
            n = n + thermal_noise_excess(s, bath.beta_th)
        else:
            n = noise_kernel(s, 0.0, bath)
    return n


def diffusion_coefficient(t, omega, bath: OhmicBath, method="spectral"):
    """Master-equation diffusion coefficient per unit ``gamma^2``,

        d(t) = int_0^t ds cos(omega s) N(t, t - s).

    ``method="spectral"`` uses the exact vacuum closed form plus a weighted
    quadrature of the thermal excess; ``method="nested"`` integrates the
    quadrature noise kernel directly and is only practical for modest
    ``cutoff * t``.
    """
    if t < 0 or not omega > 0:
        raise ValueError("need t >= 0 and omega > 0")
    if t == 0:
        return 0.0
    if method == "nested":
        return _nested(t, omega, bath, weight_t=False)
    d = float(vacuum_diffusion(t, omega, bath.cutoff))
    if math.isinf(bath.beta_th):
        return d
    if _thermal_safe(bath):
        a, _ = _thermal_moments(t, omega, bath.beta_th)
        return d + a
    return d + _thermal_spectral(t, omega, bath, "d")


def diffusion_integral(t_upper, omega, bath: OhmicBath, method="spectral"):
    """``int_0^{t_upper} d(t) dt`` per unit ``gamma^2``."""
    if t_upper < 0 or not omega > 0:
        raise ValueError("need t_upper >= 0 and omega > 0")
    if t_upper == 0:
        return 0.0
    if method == "nested":
        return _nested(t_upper, omega, bath, weight_t=True)
    total = float(vacuum_diffusion_integral(t_upper, omega, bath.cutoff))
    return total + thermal_diffusion_integral(t_upper, omega, bath)


def thermal_diffusion_integral(t_upper, omega, bath: OhmicBath):
    """Temperature-dependent part of :func:`diffusion_integral`."""
    if math.isinf(bath.beta_th) or t_upper == 0:
        return 0.0
    if _thermal_safe(bath):
        a, b = _thermal_moments(t_upper, omega, bath.beta_th)
        return t_upper * a - b
    return _thermal_spectral(t_upper, omega, bath, "D")


def small_temperature_bound(t, omega, beta_th):
    """Low-temperature estimate ``omega pi t/2 + 4/(omega^2 beta^2)``."""
    extra = 0.0 if math.isinf(beta_th) else 4.0 / (omega * beta_th) ** 2
    return 0.5 * math.pi * omega * t + extra


def _nested(t, omega, bath, weight_t):
    n_panels = int(math.ceil(4.0 * (bath.cutoff + omega) * t / math.pi)) + 4
    if n_panels > 4000:
        raise QuadratureNonConvergent(
            "nested quadrature limited to cutoff*t below ~3000")
    edges = np.linspace(0.0, t, n_panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    half, mid = 0.5 * (b - a), 0.5 * (b + a)
    nodes = (mid + half * _GL_LO[0]).ravel()
    weights = (half * _GL_LO[1]).ravel()
    kern = noise_kernel(nodes, 0.0, bath)
    factor = (t - nodes) if weight_t else 1.0
    return math.fsum(weights * factor * np.cos(omega * nodes) * kern)
