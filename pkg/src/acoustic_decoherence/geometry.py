"""Ring velocity profile, acoustic null coordinates and mode quantization.

Positions on the ring are arc lengths ``x = R*theta`` with ``R = L/(2*pi)``.
The flow velocity is the five-piece, piecewise-linear profile

    v_min                                  0 <= theta <= theta_H - g1
    beta + alpha*(theta - theta_H)/g1      |theta - theta_H| <= g1
    v_max                                  theta_H + g1 <= theta <= 2pi - theta_H - g2
    beta - alpha*(theta - 2pi + theta_H)/g2
    v_min                                  2pi - theta_H + g2 <= theta <= 2pi

with ``beta = (v_max + v_min)/2`` and ``alpha = (v_max - v_min)/2``.  Sound
rays of the Painleve-Gullstrand-Lemaitre metric

    ds^2 = (c^2 - v^2) dt^2 + 2 v dx dt - dx^2

have null coordinates ``u = t - x_u`` and ``v = t - x_v`` built from
``x_u = int dx/(c + v)`` and ``x_v = -int dx/(c - v)`` (see
:func:`null_coordinate` for the sign convention used here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from .errors import HorizonSingular

TWO_PI = 2.0 * math.pi


class Branch(str, Enum):
    U = "u"
    V = "v"


@dataclass(frozen=True)
class PhysParams:
    """Physical constants of the ring (natural units, ``c = 1`` by default).

    ``delta`` is always derived as ``L / N_ions``.
    """

    c: float = 1.0
    L: float = TWO_PI
    N_ions: int = 1000
    rho: float = 1.0
    hbar: float = 1.0
    tau: float = TWO_PI

    def __post_init__(self):
        if not (self.c > 0 and self.L > 0 and self.rho > 0
                and self.hbar > 0 and self.tau > 0):
            raise ValueError("c, L, rho, hbar and tau must be positive")
        if int(self.N_ions) != self.N_ions or self.N_ions < 2:
            raise ValueError("N_ions must be an integer >= 2")

    @property
    def delta(self) -> float:
        return self.L / self.N_ions

    @property
    def radius(self) -> float:
        return self.L / TWO_PI


@dataclass(frozen=True)
class RingProfile:
    v_min: float = 0.9
    v_max: float = 1.1
    theta_H: float = math.pi / 2
    gamma1: float = 0.05 * TWO_PI
    gamma2: float = 0.05 * TWO_PI

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("transition half-widths must be positive")
        edges = self.angle_breakpoints()
        if np.any(np.diff(edges) < 0):
            raise ValueError(
                f"profile pieces overlap: breakpoints {edges.tolist()}")

    @property
    def beta_p(self) -> float:
        return 0.5 * (self.v_max + self.v_min)

    @property
    def alpha_p(self) -> float:
        return 0.5 * (self.v_max - self.v_min)

    def angle_breakpoints(self) -> np.ndarray:
        th, g1, g2 = self.theta_H, self.gamma1, self.gamma2
        return np.array([0.0, th - g1, th + g1,
                         TWO_PI - th - g2, TWO_PI - th + g2, TWO_PI])

    def mean_velocity(self) -> float:
        """Angular average of ``v`` (each ramp averages to ``beta_p``)."""
        th, g1, g2 = self.theta_H, self.gamma1, self.gamma2
        slow = 2 * th - g1 - g2
        fast = TWO_PI - 2 * th - g1 - g2
        ramps = 2 * (g1 + g2)
        return (self.v_min * slow + self.v_max * fast
                + self.beta_p * ramps) / TWO_PI

    def revolution_mismatch(self, tau: float) -> float:
        """``mean(v) - 2*pi/tau``; zero when the revolution constraint holds."""
        return self.mean_velocity() - TWO_PI / tau

    @classmethod
    def constrained(cls, tau: float, v_min: float | None = None,
                    v_max: float | None = None, **shape) -> "RingProfile":
        """Build a profile whose mean velocity is ``2*pi/tau``.

        Exactly one of ``v_min``/``v_max`` is pinned; the other is solved
        for (the mean is affine in each of them).
        """
        if (v_min is None) == (v_max is None):
            raise ValueError("pin exactly one of v_min, v_max")
        target = TWO_PI / tau
        if v_min is not None:
            p0 = cls(v_min=v_min, v_max=v_min, **shape)
            p1 = cls(v_min=v_min, v_max=v_min + 1.0, **shape)
            slope = p1.mean_velocity() - p0.mean_velocity()
            return cls(v_min=v_min,
                       v_max=v_min + (target - p0.mean_velocity()) / slope,
                       **shape)
        p0 = cls(v_min=v_max, v_max=v_max, **shape)
        p1 = cls(v_min=v_max - 1.0, v_max=v_max, **shape)
        slope = p0.mean_velocity() - p1.mean_velocity()
        return cls(v_min=v_max - (p0.mean_velocity() - target) / slope,
                   v_max=v_max, **shape)


@dataclass(frozen=True)
class ModeSpec:
    branch: Branch
    n: int
    omega: float

    def __post_init__(self):
        if self.n < 1 or not self.omega > 0:
            raise ValueError("mode index must be >= 1 and omega > 0")


def profile_velocity(profile: RingProfile, theta):
    """Flow velocity at angle(s) ``theta`` (reduced mod 2*pi)."""
    th = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    b, a = profile.beta_p, profile.alpha_p
    t_h, g1, g2 = profile.theta_H, profile.gamma1, profile.gamma2
    e = profile.angle_breakpoints()
    out = np.select(
        [th <= e[1], th <= e[2], th <= e[3], th <= e[4]],
        [np.full_like(th, profile.v_min),
         b + a * (th - t_h) / g1,
         np.full_like(th, profile.v_max),
         b - a * (th - TWO_PI + t_h) / g2],
        default=profile.v_min,
    )
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class _Pieces:
    """Piecewise-linear ``w(x) = c +/- v(x)`` on ``[0, L]`` for one branch."""

    x: np.ndarray          # piece start points, len m+1 (last is L)
    w0: np.ndarray         # w at piece starts
    slope: np.ndarray      # dw/dx on each piece
    cum: np.ndarray = field(repr=False)   # null coordinate at piece starts


def _pieces(profile: RingProfile, params: PhysParams, branch: Branch) -> _Pieces:
    sign = 1.0 if Branch(branch) is Branch.U else -1.0
    xs = profile.angle_breakpoints() * params.radius
    keep = np.concatenate([[True], np.diff(xs) > 0])
    xs = xs[keep]
    vs = profile_velocity(profile, xs / params.radius)
    vs[-1] = profile.v_min
    w = params.c + sign * vs
    if np.any(w == 0) or np.any(np.sign(w[:-1]) != np.sign(w[1:])):
        raise HorizonSingular(
            f"branch {Branch(branch).value}: c {'+' if sign > 0 else '-'} v "
            "changes sign on the ring (sonic horizon)")
    dx = np.diff(xs)
    slope = np.diff(w) / dx
    seg = _segment_integral(w[:-1], slope, dx)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return _Pieces(xs, w[:-1], slope, cum)


def _segment_integral(w0, slope, h):
    """``int_0^h dy / (w0 + slope*y)``, exact, stable as slope -> 0."""
    w0, slope, h = np.broadcast_arrays(*(np.asarray(a, float) for a in (w0, slope, h)))
    r = slope * h / w0
    small = np.abs(r) < 1e-8
    safe_r = np.where(small, 1.0, r)
    ratio = np.where(small, 1.0 - r / 2 + r * r / 3, np.log1p(safe_r) / safe_r)
    return h / w0 * ratio


def null_coordinate(profile: RingProfile, params: PhysParams, x, branch=Branch.U):
    """Null-coordinate offset ``int_0^x dx'/(c +/- v(x'))``.

    Branch ``u`` integrates ``1/(c + v)``; branch ``v`` integrates
    ``1/(c - v)``.  Positions beyond ``L`` are handled by periodicity.
    Raises :class:`HorizonSingular` for branch ``v`` when ``c = v`` somewhere
    on the ring.
    """
    pc = _pieces(profile, params, branch)
    xa = np.asarray(x, dtype=float)
    turns = np.floor(xa / params.L)
    r = xa - turns * params.L
    idx = np.clip(np.searchsorted(pc.x, r, side="right") - 1, 0, len(pc.w0) - 1)
    partial = _segment_integral(pc.w0[idx], pc.slope[idx], r - pc.x[idx])
    out = turns * pc.cum[-1] + pc.cum[idx] + partial
    return out if out.ndim else float(out)


def null_period(profile: RingProfile, params: PhysParams, branch=Branch.U) -> float:
    """Total null-coordinate length of the ring, ``x_branch(L)``."""
    return float(_pieces(profile, params, branch).cum[-1])


def allowed_frequencies(profile: RingProfile, params: PhysParams,
                        branch=Branch.U) -> list[ModeSpec]:
    """Periodic modes ``omega_n = 2*pi*n/|P|`` up to the lattice cutoff.

    The cutoff is the frequency whose null-coordinate wavelength equals the
    ion spacing, ``omega_max = 2*pi*N/|P|``, so every branch carries exactly
    ``N_ions`` modes.
    """
    branch = Branch(branch)
    period = abs(null_period(profile, params, branch))
    return [ModeSpec(branch, n, TWO_PI * n / period)
            for n in range(1, params.N_ions + 1)]


def omega_max(profile: RingProfile, params: PhysParams, branch=Branch.U) -> float:
    period = abs(null_period(profile, params, branch))
    return TWO_PI * params.N_ions / period


def geometric_factor_V(mode: ModeSpec, profile: RingProfile, params: PhysParams,
                       rtol: float = 1e-8) -> float:
    """Overlap ``V = int_0^L cos^2(omega * x_branch(x)) dx``.

    Each linear piece is split into sub-intervals spanning at most half an
    oscillation of the integrand, then integrated adaptively.
    """
    pc = _pieces(profile, params, mode.branch)
    omega = mode.omega
    parts = []
    for i in range(len(pc.w0)):
        x0, x1 = pc.x[i], pc.x[i + 1]
        w0, s, base = pc.w0[i], pc.slope[i], pc.cum[i]

        def f(x, w0=w0, s=s, base=base, x0=x0):
            y = x - x0
            r = s * y / w0
            xi = base + (y / w0 if abs(r) < 1e-12 else math.log1p(r) / s)
            return math.cos(omega * xi) ** 2

        phase = abs(omega * (pc.cum[i + 1] - base))
        nsub = max(1, int(math.ceil(phase / (0.5 * math.pi))))
        edges = _phase_edges(x0, x1, w0, s, nsub)
        for a, b in zip(edges[:-1], edges[1:]):
            val, err = integrate.quad(f, a, b, epsabs=0.0,
                                      epsrel=rtol * 1e-2, limit=200)
            parts.append(val)
    return math.fsum(parts)


def _phase_edges(x0, x1, w0, s, nsub):
    """Sub-interval edges equally spaced in null coordinate on one piece."""
    total = float(_segment_integral(w0, s, x1 - x0))
    targets = np.linspace(0.0, total, nsub + 1)
    if abs(s * (x1 - x0) / w0) < 1e-12:
        ys = targets * w0
    else:
        ys = np.expm1(s * targets) * w0 / s
    ys[0], ys[-1] = 0.0, x1 - x0
    return x0 + ys
