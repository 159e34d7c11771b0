"""Collapsing acoustic black hole and its left-moving characteristics.

The flow is switched on by ``sigma(t)`` (``sigma(0) = 0``, ``sigma -> 1``):

    v(x, t) = sigma(t) * (1 - kappa x)    |x| <= a
    v(x, t) = sigma(t) * v_min            x > a
    v(x, t) = sigma(t) * v_max            x < -a

with ``c = 1`` and continuity ``v_min = 1 - kappa a``, ``v_max = 1 + kappa a``.
The supersonic interior lies at ``x < 0``.  Left-moving waves obey
``(d_t + v d_x - d_x) Psi = 0`` and are constant along ``dx/dt = v - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp

from .errors import StepFailure

RTOL = 1e-10
ATOL = 1e-12


class SigmaKind(str, Enum):
    TANH = "tanh"
    SMOOTHSTEP = "smoothstep"
    # frozen limits, used for analytic checks
    ZERO = "zero"
    ONE = "one"


class Region(str, Enum):
    HAWKING = "hawking"
    TRIVIAL_FLAT = "trivial_flat"


@dataclass(frozen=True)
class CollapseProfile:
    a: float = 1.0
    kappa: float = 0.1
    tau_c: float = 1.0
    sigma_kind: SigmaKind = SigmaKind.TANH

    def __post_init__(self):
        if not (self.a > 0 and self.tau_c > 0 and self.kappa >= 0):
            raise ValueError("need a > 0, tau_c > 0, kappa >= 0")
        object.__setattr__(self, "sigma_kind", SigmaKind(self.sigma_kind))

    @classmethod
    def from_velocities(cls, v_min=0.9, v_max=1.1, a=1.0, **kw) -> "CollapseProfile":
        """Derive ``kappa`` from the asymptotic velocities (needs ``v_min + v_max = 2``)."""
        if not math.isclose(v_min + v_max, 2.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("continuity at x = +-a needs v_min + v_max = 2 (c = 1)")
        return cls(a=a, kappa=(v_max - v_min) / (2.0 * a), **kw)

    @property
    def v_min(self) -> float:
        return 1.0 - self.kappa * self.a

    @property
    def v_max(self) -> float:
        return 1.0 + self.kappa * self.a

    def sigma(self, t):
        return sigma(t, self.tau_c, self.sigma_kind)

    def velocity(self, x, t):
        x = np.asarray(x, dtype=float)
        w = np.where(x > self.a, self.v_min,
                     np.where(x < -self.a, self.v_max, 1.0 - self.kappa * x))
        out = self.sigma(t) * w
        return out if np.ndim(out) else float(out)


def sigma(t, tau_c=1.0, kind=SigmaKind.TANH):
    """Switching function: ``tanh(t/tau_c)`` or a cubic smoothstep over ``3 tau_c``."""
    kind = SigmaKind(kind)
    t = np.asarray(t, dtype=float)
    if kind is SigmaKind.TANH:
        out = np.tanh(t / tau_c)
    elif kind is SigmaKind.SMOOTHSTEP:
        s = np.clip(t / (3.0 * tau_c), 0.0, 1.0)
        out = s * s * (3.0 - 2.0 * s)
    elif kind is SigmaKind.ZERO:
        out = np.zeros_like(t)
    else:
        out = np.ones_like(t)
    return out if out.ndim else float(out)


def hawking_temperature(profile: CollapseProfile) -> float:
    """``T_H = kappa / (2 pi)`` with ``hbar = k_B = c = 1``."""
    return profile.kappa / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# characteristic integration

@dataclass(frozen=True)
class Characteristic:
    x0: float
    t: np.ndarray
    x: np.ndarray
    log_stretch: np.ndarray     # ln(dx(t)/dx0) along the path
    crossings: tuple            # (t, x) of each x = +-a junction crossing

    @property
    def crossed_boundary(self) -> bool:
        return bool(self.crossings)


def _piece(x, a):
    return 1 if x > a else (-1 if x < -a else 0)


def _rhs_factory(profile, piece, direction):
    a, k = profile.a, profile.kappa
    sig = profile.sigma

    if piece == 0:
        def rhs(t, y):
            s = sig(t)
            return (s * (1.0 - k * y[0]) + direction, -s * k)
    else:
        w = profile.v_min if piece > 0 else profile.v_max

        def rhs(t, y):
            return (sig(t) * w + direction, 0.0)
    return rhs


def _events(profile, piece):
    """Exit events for one piece; only the outward crossing direction fires."""
    a = profile.a

    def hit_plus(t, y):
        return y[0] - a

    def hit_minus(t, y):
        return y[0] + a

    hit_plus.terminal = hit_minus.terminal = True
    if piece == 0:
        hit_plus.direction, hit_minus.direction = 1.0, -1.0
        return [hit_plus, hit_minus]
    if piece > 0:
        hit_plus.direction = -1.0
        return [hit_plus]
    hit_minus.direction = 1.0
    return [hit_minus]


def _integrate(x_start, t_start, t_stop, profile, direction=-1.0, keep_path=True):
    """Piecewise RK45 integration with restart at every ``x = +-a`` crossing."""
    a = profile.a
    sign = 1.0 if t_stop >= t_start else -1.0
    t_cur, x_cur, ell = float(t_start), float(x_start), 0.0
    ts, xs, ls = [t_cur], [x_cur], [ell]
    crossings = []
    # with kappa = 0 all three pieces coincide: no junctions to track
    uniform = profile.kappa == 0
    piece = 0 if uniform else _piece(x_cur, a)
    if not uniform and abs(abs(x_cur) - a) < 1e-14 * max(1.0, a):
        piece = _entry_piece(x_cur, t_cur, profile, direction, sign)
    for _ in range(10_000):
        if sign * (t_stop - t_cur) <= 0:
            break
        sol = solve_ivp(_rhs_factory(profile, piece, direction), (t_cur, t_stop),
                        (x_cur, ell), method="RK45", rtol=RTOL, atol=ATOL,
                        events=None if uniform else _events(profile, piece))
        if sol.status == -1:
            raise StepFailure(sol.message)
        if keep_path:
            ts.extend(sol.t[1:])
            xs.extend(sol.y[0, 1:])
            ls.extend(sol.y[1, 1:])
        t_cur, x_cur, ell = sol.t[-1], sol.y[0, -1], sol.y[1, -1]
        if sol.status == 1:
            # snap onto the junction and continue on the piece being entered
            x_cur = a if abs(x_cur - a) < abs(x_cur + a) else -a
            crossings.append((t_cur, x_cur))
            new_piece = _entry_piece(x_cur, t_cur, profile, direction, sign)
            if new_piece == piece:
                # grazing contact: nudge forward in time
                t_cur += sign * 1e-9 * max(1.0, abs(t_cur))
            piece = new_piece
            if keep_path:
                xs[-1] = x_cur
    else:
        raise StepFailure("too many junction crossings")
    if not keep_path:
        ts, xs, ls = [t_cur], [x_cur], [ell]
    return np.array(ts), np.array(xs), np.array(ls), tuple(crossings)


def _entry_piece(xb, t, profile, direction, sign):
    """Piece entered from junction ``xb`` when moving in time direction ``sign``."""
    drift = sign * (profile.velocity(xb, t) + direction)
    if xb > 0:
        return 1 if drift > 0 else 0
    return 0 if drift > 0 else -1


def solve_characteristic(x0: float, t_end: float, profile: CollapseProfile,
                         direction: float = -1.0) -> Characteristic:
    """Forward characteristic ``dx/dt = v(x, t) + direction`` from ``(0, x0)``.

    ``direction = -1`` follows left-moving sound, ``+1`` right-moving.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    t, x, ell, cr = _integrate(x0, 0.0, t_end, profile, direction)
    return Characteristic(float(x0), t, x, ell, cr)


def propagate(x: float, t_start: float, t_stop: float, profile: CollapseProfile,
              direction: float = -1.0) -> float:
    """Position at ``t_stop`` of the characteristic through ``(x, t_start)``."""
    if t_stop == t_start:
        return float(x)
    _, xs, _, _ = _integrate(x, t_start, t_stop, profile, direction, keep_path=False)
    return float(xs[-1])


def trace_back_with_jacobian(x: float, t: float, profile: CollapseProfile,
                             direction: float = -1.0):
    """Start point ``x0`` of the characteristic through ``(x, t)`` and
    ``dx0/dx`` at fixed ``t``."""
    if t == 0:
        return float(x), 1.0
    _, xs, ls, _ = _integrate(x, t, 0.0, profile, direction, keep_path=False)
    return float(xs[-1]), float(math.exp(ls[-1]))


def trace_back(x: float, t: float, profile: CollapseProfile,
               direction: float = -1.0) -> float:
    return trace_back_with_jacobian(x, t, profile, direction)[0]


def characteristic_map(xs, t, profile: CollapseProfile):
    """Vector of ``(x0, dx0/dx)`` for every sample position at time ``t``."""
    out = np.array([trace_back_with_jacobian(float(x), t, profile) for x in np.ravel(xs)])
    return out[:, 0], out[:, 1]


def classify_region(x: float, t: float, profile: CollapseProfile) -> Region:
    """``hawking`` when the characteristic through ``(x, t)`` started at ``x0 < a``."""
    return Region.HAWKING if trace_back(x, t, profile) < profile.a else Region.TRIVIAL_FLAT


def separatrix(t: float, profile: CollapseProfile) -> float:
    """Position at time ``t`` of the characteristic launched from ``x0 = a``."""
    _, xs, _, _ = _integrate(profile.a, 0.0, t, profile, -1.0, keep_path=False)
    return float(xs[-1])


def mode_normalization(k):
    return 1.0 / np.sqrt(4.0 * np.pi * np.abs(k))


def left_mode(x: float, t: float, k, profile: CollapseProfile):
    """``Psi_k(x, t) = exp(i k x0(x, t)) / sqrt(4 pi |k|)``."""
    x0 = trace_back(x, t, profile)
    k = np.asarray(k, dtype=float)
    return mode_normalization(k) * np.exp(1j * k * x0)
