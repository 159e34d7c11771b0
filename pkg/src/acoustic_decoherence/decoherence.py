"""Decoherence time of a ring mode and parameter sweeps.

The reduced density matrix of a mode decays as ``exp(-Gamma/hbar int_0^t d)``
with ``Gamma = gamma^2 V (Psi+ - Psi-)^2 / 2`` and ``(Psi+ - Psi-) = sqrt(rho)
delta``.  The decoherence time solves ``Gamma int_0^{t_D} d(t) dt = hbar``.

Closed forms follow from the long-time behaviour of the diffusion integral,
``int_0^t d ~ omega pi t / 2 + 4 / (omega beta)^2``:

* zero temperature: ``t_D = 2 hbar / (Gamma omega pi)``
* small temperature: ``t_D = 2 hbar / (Gamma omega pi) - 8 / (omega^3 pi beta^2)``
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

from scipy import optimize

from . import environment as env
from .errors import AcousticError, NoRoot, OutOfRegime, ZeroCoupling
from .geometry import (Branch, ModeSpec, PhysParams, RingProfile,
                       allowed_frequencies, geometric_factor_V, omega_max)

FEASIBILITY_FACTOR = 100.0
SMALL_T_MAX_CORRECTION = 0.25


class Method(str, Enum):
    CLOSED_FORM_T0 = "closed_form_T0"
    CLOSED_FORM_SMALL_T = "closed_form_smallT"
    NUMERIC_ROOT = "numeric_root"


@dataclass(frozen=True)
class DecoherenceResult:
    t_D: float
    method: Method
    mode: ModeSpec
    V: float
    Gamma: float
    converged: bool
    omega_tD_product: float
    measurement_feasible: bool = False
    lower_bound: float | None = None


@functools.lru_cache(maxsize=4096)
def _cached_V(mode, profile, params):
    return geometric_factor_V(mode, profile, params)


def gamma_factor(mode: ModeSpec, profile: RingProfile, params: PhysParams,
                 bath: env.OhmicBath, V: float | None = None) -> float:
    """``Gamma = gamma^2 V rho delta^2 / 2``."""
    if V is None:
        V = _cached_V(mode, profile, params)
    return bath.gamma ** 2 * V * params.rho * params.delta ** 2 / 2.0


def _result(t_D, method, mode, V, Gamma, params, converged=True, lower=None):
    return DecoherenceResult(
        t_D=t_D, method=method, mode=mode, V=V, Gamma=Gamma,
        converged=converged, omega_tD_product=mode.omega * t_D,
        measurement_feasible=bool(converged and t_D >= FEASIBILITY_FACTOR * params.tau),
        lower_bound=lower,
    )


def _setup(mode, profile, params, bath):
    if bath.gamma == 0:
        raise ZeroCoupling("gamma = 0: the mode never decoheres")
    V = _cached_V(mode, profile, params)
    return V, gamma_factor(mode, profile, params, bath, V)


def decoherence_time_T0(mode, profile, params, bath) -> DecoherenceResult:
    """Zero-temperature closed form ``2 hbar / (Gamma omega pi)``.

    The bath temperature is ignored.
    """
    V, Gamma = _setup(mode, profile, params, bath)
    t_D = 2.0 * params.hbar / (Gamma * mode.omega * math.pi)
    return _result(t_D, Method.CLOSED_FORM_T0, mode, V, Gamma, params)


def decoherence_time_smallT(mode, profile, params, bath) -> DecoherenceResult:
    """Low-temperature closed form with the ``beta^-2`` correction.

    Raises :class:`OutOfRegime` once the correction reaches a quarter of the
    leading term.
    """
    V, Gamma = _setup(mode, profile, params, bath)
    w = mode.omega
    lead = 2.0 * params.hbar / (Gamma * w * math.pi)
    beta = bath.beta_th
    corr = 0.0 if math.isinf(beta) else 8.0 / (w ** 3 * math.pi * beta ** 2)
    if corr >= SMALL_T_MAX_CORRECTION * lead:
        raise OutOfRegime(
            f"thermal correction {corr:.3g} is {corr / lead:.0%} of the leading term")
    return _result(lead - corr, Method.CLOSED_FORM_SMALL_T, mode, V, Gamma, params)


def decoherence_time_numeric(mode, profile, params, bath,
                             rtol: float = 1e-10) -> DecoherenceResult:
    """Root of ``Gamma * int_0^t d / hbar = 1``.

    The bracket grows geometrically from ``t = 1/omega``; roots below one
    mode period are returned but sit outside the regime where the master
    equation is trusted (check ``omega_tD_product``).
    """
    V, Gamma = _setup(mode, profile, params, bath)
    w = mode.omega

    def F(t):
        return Gamma * env.diffusion_integral(t, w, bath) / params.hbar - 1.0

    t_max = 1e6 * params.tau
    lo = hi = 1.0 / w
    f_hi = F(hi)
    if f_hi > 0:
        while F(lo) > 0:
            lo *= 0.25
            if lo < 1e-12 / w:
                raise NoRoot("decoherence condition met at t -> 0", lower_bound=0.0)
    else:
        while f_hi <= 0:
            lo, hi = hi, min(hi * 4.0, t_max)
            f_hi = F(hi)
            if f_hi <= 0 and hi >= t_max:
                raise NoRoot(f"no decoherence before t = {t_max:g}", lower_bound=t_max)
    t_D = optimize.brentq(F, lo, hi, xtol=1e-300, rtol=rtol, maxiter=500)
    return _result(t_D, Method.NUMERIC_ROOT, mode, V, Gamma, params)


def diffusion_residual(result: DecoherenceResult, bath, params) -> float:
    """``Gamma int_0^{t_D} d / hbar``; 1 at an exact root."""
    return (result.Gamma * env.diffusion_integral(result.t_D, result.mode.omega, bath)
            / params.hbar)


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class DecoherenceSetup:
    """Everything needed to evaluate ``t_D`` for the lowest and highest mode.

    ``temperature`` is measured in units of the lowest ring frequency
    ``omega_1``; the bath cutoff is ``cutoff_ratio * omega_max``.
    """

    params: PhysParams = field(default_factory=PhysParams)
    profile: RingProfile = field(default_factory=RingProfile)
    zeta: float = 2e-8
    temperature: float = 0.0
    cutoff_ratio: float = 1e3
    branch: Branch = Branch.U
    constrain_revolution: bool = False
    method: Method = Method.NUMERIC_ROOT

    def modes(self) -> list[ModeSpec]:
        ms = allowed_frequencies(self.profile, self.params, self.branch)
        return [ms[0], ms[-1]]

    def bath(self) -> env.OhmicBath:
        w1 = self.modes()[0].omega
        cutoff = self.cutoff_ratio * omega_max(self.profile, self.params, self.branch)
        return env.OhmicBath.from_zeta(self.zeta, self.params, self.profile,
                                       temperature=self.temperature * w1,
                                       cutoff=cutoff)


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    branch: str
    n: int
    omega: float
    V: float
    Gamma: float
    t_D: float
    method: str
    converged: bool
    measurement_feasible: bool
    error: str = ""

    COLUMNS = ("axis_value", "branch", "n", "omega", "V", "Gamma", "t_D",
               "method", "converged", "measurement_feasible", "error")

    def as_record(self) -> dict:
        return {"axis_value": self.value, "branch": self.branch, "n": self.n,
                "omega": self.omega, "V": self.V, "Gamma": self.Gamma,
                "t_D": self.t_D, "method": self.method,
                "converged": self.converged,
                "measurement_feasible": self.measurement_feasible,
                "error": self.error}


_SOLVERS = {
    Method.CLOSED_FORM_T0: decoherence_time_T0,
    Method.CLOSED_FORM_SMALL_T: decoherence_time_smallT,
    Method.NUMERIC_ROOT: decoherence_time_numeric,
}


def apply_axis(setup: DecoherenceSetup, axis: str, value: float) -> DecoherenceSetup:
    if axis == "zeta":
        return replace(setup, zeta=value)
    if axis == "temperature":
        return replace(setup, temperature=value)
    if axis == "v_min":
        prof = setup.profile
        shape = dict(theta_H=prof.theta_H, gamma1=prof.gamma1, gamma2=prof.gamma2)
        if setup.constrain_revolution:
            new = RingProfile.constrained(setup.params.tau, v_min=value, **shape)
        else:
            new = RingProfile(v_min=value, v_max=prof.v_max, **shape)
        return replace(setup, profile=new)
    raise ValueError(f"unknown sweep axis {axis!r}")


def evaluate(setup: DecoherenceSetup, axis: str = "", value: float = math.nan):
    """Rows for the lowest and highest mode of one configuration."""
    rows = []
    try:
        modes, bath = setup.modes(), setup.bath()
    except AcousticError as exc:
        return [SweepRow(axis, value, setup.branch.value, 0, math.nan, math.nan,
                         math.nan, math.nan, setup.method.value, False, False,
                         f"{type(exc).__name__}: {exc}")]
    for mode in modes:
        try:
            r = _SOLVERS[setup.method](mode, setup.profile, setup.params, bath)
            rows.append(SweepRow(axis, value, mode.branch.value, mode.n, mode.omega,
                                 r.V, r.Gamma, r.t_D, r.method.value, r.converged,
                                 r.measurement_feasible))
        except AcousticError as exc:
            t_low = getattr(exc, "lower_bound", None)
            rows.append(SweepRow(axis, value, mode.branch.value, mode.n, mode.omega,
                                 math.nan, math.nan,
                                 math.nan if t_low is None else t_low,
                                 setup.method.value, False, False,
                                 f"{type(exc).__name__}: {exc}"))
    return rows


def sweep(axis: str, grid, base: DecoherenceSetup, threads: int = 1) -> list[SweepRow]:
    """One pair of rows (n = 1 and n = N) per grid value, in grid order.

    Row failures are recorded in the ``error`` column rather than raised.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty sweep grid")
    setups = [apply_axis(base, axis, float(v)) for v in grid]
    work = lambda i: evaluate(setups[i], axis, float(grid[i]))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, range(len(grid))))
    else:
        chunks = [work(i) for i in range(len(grid))]
    return [row for chunk in chunks for row in chunk]


def calibrate_density(setup: DecoherenceSetup, target_tD: float,
                      mode_index: int = -1) -> DecoherenceSetup:
    """Rescale ``rho`` so the zero-temperature closed form hits ``target_tD``.

    ``t_D`` scales as ``rho^-2`` at fixed ``zeta`` (``gamma^2`` carries one
    power of ``rho``, ``Gamma`` another).
    """
    mode = setup.modes()[mode_index]
    r = decoherence_time_T0(mode, setup.profile, setup.params, setup.bath())
    rho = setup.params.rho * math.sqrt(r.t_D / target_tD)
    return replace(setup, params=replace(setup.params, rho=rho))
