"""One-dimensional atomic motion along the laser axis.

Harmonic, Gaussian-tweezer and sinusoidally modulated traps.  For the
modulated trap ``V(t, x) = V0 (1 - cos(nu t)) x^2`` the motion obeys a
Mathieu equation; its Floquet exponent plays the role of the trap
frequency.  Times and lengths are SI here (s, m).
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .model import ATOMIC_MASS_UNIT, BOLTZMANN

log = logging.getLogger(__name__)

DEFAULT_MASS = 171 * ATOMIC_MASS_UNIT


class TrapKind(enum.Enum):
    OFF = "OFF"
    HARMONIC = "HARMONIC"
    GAUSSIAN = "GAUSSIAN"
    MODULATED = "MODULATED"


class IntegrationError(RuntimeError):
    pass


class NoSolutionError(ValueError):
    pass


@dataclass(frozen=True)
class TrapConfig:
    """Trap along the laser axis.

    ``omega`` is the harmonic frequency (HARMONIC), ``U0``/``w0`` the depth
    and 1/e^2 radius of a Gaussian tweezer, ``V0``/``nu`` the stiffness and
    modulation frequency of the modulated trap.  ``sigma_omega`` is a
    relative shot-to-shot spread of the trap frequency.
    """

    kind: TrapKind = TrapKind.OFF
    omega: float = 0.0
    U0: float = 0.0
    w0: float = 0.0
    V0: float = 0.0
    nu: float = 0.0
    sigma_omega: float = 0.0
    mass: float = DEFAULT_MASS

    def __post_init__(self):
        need = {TrapKind.HARMONIC: ("omega",), TrapKind.GAUSSIAN: ("U0", "w0"),
                TrapKind.MODULATED: ("V0", "nu")}.get(self.kind, ())
        for name in need + ("mass",):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive for a {self.kind.value} trap")
        if self.sigma_omega < 0:
            raise ValueError("sigma_omega must be non-negative")

    @classmethod
    def harmonic(cls, omega, sigma_omega=0.0, mass=DEFAULT_MASS):
        return cls(TrapKind.HARMONIC, omega=omega, sigma_omega=sigma_omega, mass=mass)

    @classmethod
    def gaussian(cls, U0, w0, mass=DEFAULT_MASS, sigma_omega=0.0):
        return cls(TrapKind.GAUSSIAN, U0=U0, w0=w0, mass=mass, sigma_omega=sigma_omega)

    @classmethod
    def modulated_for(cls, omega_tr, mass=DEFAULT_MASS, dn=2, sigma_omega=0.0):
        """Modulated trap whose Floquet frequency equals ``omega_tr`` with ``nu = 2 dn omega_tr``."""
        c = modulation_ratio(dn)
        omega0 = 2 * dn * omega_tr / c
        return cls(TrapKind.MODULATED, V0=0.5 * mass * omega0 ** 2, nu=2 * dn * omega_tr,
                   sigma_omega=sigma_omega, mass=mass)

    @property
    def small_amplitude_frequency(self) -> float:
        """Frequency of small oscillations (Floquet frequency for the modulated trap)."""
        if self.kind is TrapKind.HARMONIC:
            return self.omega
        if self.kind is TrapKind.GAUSSIAN:
            return math.sqrt(4 * self.U0 / (self.mass * self.w0 ** 2))
        if self.kind is TrapKind.MODULATED:
            return mathieu_exponent(self.V0, self.mass, self.nu).omega_tr
        return 0.0

    def stiffness(self, t, scale=1.0):
        """``k(t)/m`` for the linear traps (harmonic and modulated)."""
        if self.kind is TrapKind.HARMONIC:
            return (scale * self.omega) ** 2 * np.ones_like(np.asarray(t, float))
        if self.kind is TrapKind.MODULATED:
            return scale ** 2 * 2 * self.V0 / self.mass * (1 - np.cos(self.nu * np.asarray(t)))
        raise ValueError(f"{self.kind.value} trap is not linear")

    def acceleration(self, t, x, scale=1.0):
        """Acceleration; ``scale`` multiplies the trap frequency (stiffness by scale^2)."""
        if self.kind is TrapKind.OFF:
            return np.zeros_like(x)
        if self.kind is TrapKind.GAUSSIAN:
            w2 = self.w0 ** 2
            return -(scale ** 2) * 4 * self.U0 / (self.mass * w2) * x * np.exp(-2 * x ** 2 / w2)
        return -self.stiffness(t, scale) * x


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray

    def energy(self, trap: TrapConfig) -> np.ndarray:
        """Mechanical energy per unit mass (time-independent traps only)."""
        if trap.kind is TrapKind.HARMONIC:
            pot = 0.5 * trap.omega ** 2 * self.x ** 2
        elif trap.kind is TrapKind.GAUSSIAN:
            pot = -trap.U0 / trap.mass * np.exp(-2 * self.x ** 2 / trap.w0 ** 2)
        elif trap.kind is TrapKind.OFF:
            pot = np.zeros_like(self.x)
        else:
            raise ValueError("energy is not conserved in a modulated trap")
        return 0.5 * self.v ** 2 + pot


# --------------------------------------------------------------------------
# Mathieu / Floquet


@dataclass(frozen=True)
class MathieuResult:
    omega_tr: float
    stable: bool
    half_trace: float
    monodromy: np.ndarray


def _monodromy(a: float, rtol=1e-12) -> np.ndarray:
    """Monodromy of x'' = -a (1 - cos s) x over s in [0, 2 pi]."""
    def rhs(s, y):
        w = a * (1 - math.cos(s))
        return [y[1], -w * y[0], y[3], -w * y[2]]

    sol = solve_ivp(rhs, (0, 2 * np.pi), [1.0, 0.0, 0.0, 1.0], method="DOP853",
                    rtol=rtol, atol=1e-14)
    if not sol.success:
        raise IntegrationError(sol.message)
    y = sol.y[:, -1]
    return np.array([[y[0], y[2]], [y[1], y[3]]])


def mathieu_exponent(V0: float, m: float, nu: float) -> MathieuResult:
    """Floquet frequency of ``x'' = -(2 V0/m)(1 - cos(nu t)) x``.

    The multipliers of the one-period monodromy are ``exp(+-i omega_tr T)``
    with ``T = 2 pi / nu``.  The branch of ``arccos`` is the one closest to
    the time-averaged frequency ``sqrt(2 V0/m)``.  Outside the stability
    region ``stable`` is False and ``omega_tr`` is NaN.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    if not (V0 > 0 and m > 0):
        raise ValueError("V0 and m must be positive")
    omega0 = math.sqrt(2 * V0 / m)
    a = (omega0 / nu) ** 2
    M = _monodromy(a)
    h = 0.5 * np.trace(M)
    if abs(h) > 1:
        return MathieuResult(float("nan"), False, float(h), M)
    base = math.acos(h)
    guess = omega0 * 2 * np.pi / nu
    j = round(guess / (2 * np.pi))
    cands = [2 * np.pi * jj + s * base for jj in (j - 1, j, j + 1) for s in (1, -1)]
    cands = [c for c in cands if c >= 0]
    mu = min(cands, key=lambda c: abs(c - guess))
    return MathieuResult(mu * nu / (2 * np.pi), True, float(h), M)


@lru_cache(maxsize=None)
def modulation_ratio(dn: int) -> float:
    """``nu / sqrt(2 V0/m)`` solving ``nu = 2 dn omega_tr(nu)``."""
    if dn < 1:
        raise ValueError("dn must be a positive integer")

    def g(r):
        res = mathieu_exponent(1.0, 2.0, r)  # sqrt(2 V0/m) = 1
        return r - 2 * dn * res.omega_tr if res.stable else float("nan")

    grid = np.linspace(0.5, 8 * dn, 80 * dn)
    vals = np.array([g(r) for r in grid])
    for i in range(len(grid) - 1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0:
            return brentq(g, grid[i], grid[i + 1], xtol=1e-13, rtol=1e-14)
    raise NoSolutionError(f"no real modulation frequency for dn={dn}")


def find_modulation_frequency(V0: float, m: float, dn: int = 2):
    """Modulation frequency giving half a Floquet period over ``dn`` modulation periods.

    Returns ``(nu, omega_tr)`` with ``nu = 2 dn omega_tr``.
    """
    omega0 = math.sqrt(2 * V0 / m)
    nu = modulation_ratio(dn) * omega0
    return nu, mathieu_exponent(V0, m, nu).omega_tr


# --------------------------------------------------------------------------
# trajectories


def simulate_trajectory(trap: TrapConfig, x0: float, v0: float, t_span, t_eval=None,
                        scale: float = 1.0, rtol: float = 1e-12) -> Trajectory:
    """Classical trajectory with an adaptive high-order Runge-Kutta integrator."""
    t0, t1 = t_span
    if t_eval is None:
        t_eval = np.linspace(t0, t1, 401)
    # rescale so both components are O(1) for the absolute tolerance
    om = max(trap.small_amplitude_frequency if trap.kind is not TrapKind.OFF else 0.0, 1.0 / max(
        t1 - t0, 1e-300))
    L = max(abs(x0), abs(v0) / om, 1e-12)

    def rhs(t, y):
        return [y[1] * om, float(trap.acceleration(t, y[0] * L, scale)) / (L * om)]

    sol = solve_ivp(rhs, (t0, t1), [x0 / L, v0 / (L * om)], method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=rtol * 1e-3)
    if not sol.success:
        raise IntegrationError(sol.message)
    return Trajectory(sol.t, sol.y[0] * L, sol.y[1] * L * om)


def _rk4_ensemble(trap, x0, v0, t_grid, scale, max_step, t0=0.0):
    """Fixed-step RK4 for many atoms at once; returns (x, v) on ``t_grid`` (sorted, >= t0)."""
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    xs = np.empty((len(x), len(t_grid)))
    vs = np.empty_like(xs)
    t = t0

    def acc(tt, xx):
        return trap.acceleration(tt, xx, scale)

    for j, target in enumerate(t_grid):
        n = max(1, int(math.ceil((target - t) / max_step - 1e-12))) if target > t else 0
        if n:
            h = (target - t) / n
            for _ in range(n):
                k1x, k1v = v, acc(t, x)
                k2x, k2v = v + 0.5 * h * k1v, acc(t + 0.5 * h, x + 0.5 * h * k1x)
                k3x, k3v = v + 0.5 * h * k2v, acc(t + 0.5 * h, x + 0.5 * h * k2x)
                k4x, k4v = v + h * k3v, acc(t + h, x + h * k3x)
                x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
                v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
                t += h
        xs[:, j], vs[:, j] = x, v
    return xs, vs


def _fundamental(trap, t_grid, scale=1.0, t0=0.0):
    """Cosine- and sine-like solutions c, s (unit data at ``t0``) and derivatives on ``t_grid``."""
    if trap.kind is TrapKind.OFF:
        one = np.ones_like(t_grid)
        return one, t_grid - t0, 0 * one, one
    if trap.kind is TrapKind.HARMONIC:
        w = scale * trap.omega
        tt = t_grid - t0
        return np.cos(w * tt), np.sin(w * tt) / w, -w * np.sin(w * tt), np.cos(w * tt)
    tmax = float(t_grid.max())
    if tmax <= t0:
        one = np.ones_like(t_grid)
        return one, 0 * one, 0 * one, one

    def rhs(t, y):
        k = float(trap.stiffness(t, scale))
        return [y[1], -k * y[0], y[3], -k * y[2]]

    w0 = math.sqrt(2 * trap.V0 / trap.mass) * scale
    # coincident grid times (e.g. back-to-back windows) are evaluated once
    tu, back = np.unique(t_grid, return_inverse=True)
    sol = solve_ivp(rhs, (t0, tmax), [1.0, 0.0, 0.0, 1.0], method="DOP853", t_eval=tu,
                    rtol=1e-12, atol=1e-14 / w0, dense_output=False)
    if not sol.success:
        raise IntegrationError(sol.message)
    y = sol.y[:, back]
    return y[0], y[2], y[1], y[3]


def ensemble_motion(trap: TrapConfig, x0, v0, t_grid, scale=None, t0=0.0):
    """Positions and velocities for many atoms on a common sorted time grid.

    ``x0``, ``v0`` are the state at absolute time ``t0 <= t_grid[0]``.
    Linear traps use their fundamental solutions (closed form for the
    harmonic trap); the Gaussian trap and jittered modulated traps are
    integrated with fixed-step RK4 over the whole ensemble.
    """
    t_grid = np.asarray(t_grid, float)
    x0 = np.asarray(x0, float)
    v0 = np.asarray(v0, float)
    jitter = scale is not None and np.any(np.asarray(scale) != 1.0)
    if trap.kind is TrapKind.HARMONIC and jitter:
        w = trap.omega * np.asarray(scale)[:, None]
        ct, st = np.cos(w * (t_grid - t0)), np.sin(w * (t_grid - t0))
        return x0[:, None] * ct + v0[:, None] / w * st, -x0[:, None] * w * st + v0[:, None] * ct
    if trap.kind in (TrapKind.OFF, TrapKind.HARMONIC, TrapKind.MODULATED) and not jitter:
        c, s, dc, ds = _fundamental(trap, t_grid, t0=t0)
        return (np.outer(x0, c) + np.outer(v0, s), np.outer(x0, dc) + np.outer(v0, ds))
    om = trap.small_amplitude_frequency
    sc = np.ones(len(x0)) if scale is None else np.asarray(scale, float)
    return _rk4_ensemble(trap, x0, v0, t_grid, sc, max_step=2 * np.pi / om / 4000, t0=t0)


def thermal_std(temperature: float, mass: float, omega: float):
    """Position and velocity standard deviations of a thermal atom."""
    sv = math.sqrt(BOLTZMANN * temperature / mass)
    return (sv / omega if omega > 0 else 0.0), sv


# --------------------------------------------------------------------------
# pulse windows


class ReversalMethod(enum.Enum):
    NONE = "NONE"
    SWITCH = "SWITCH"
    WAIT = "WAIT"


@dataclass
class WindowSchedule:
    """Start times (s) of the pulse halves and the sign of k during each."""

    starts: tuple
    k_signs: tuple
    centers: tuple
    half_duration: float
    drift: dict = field(default_factory=dict)


def pulse_window_schedule(trap: TrapConfig, method: ReversalMethod, half_duration: float,
                          dn: int = 2, temperature: float = 0.0,
                          wavevector: float | None = None) -> WindowSchedule:
    """Timing of a gate's pulse halves.

    WAIT: the halves are separated by half a trap period (for the modulated
    trap, by ``dn`` modulation periods, each half centered on a zero of the
    potential).  SWITCH: the halves run back to back around the same
    potential zero and the laser direction flips in between.  NONE: a single
    window.  With ``temperature`` and ``wavevector`` given, the velocity
    drift over each window of a one-sigma atom is reported in ``drift``.
    """
    h = half_duration
    if trap.kind is TrapKind.MODULATED:
        c1 = 0.0
        if method is ReversalMethod.WAIT:
            centers = (c1, c1 + 2 * np.pi * dn / trap.nu)
            starts = (centers[0] - h / 2, centers[1] - h / 2)
        elif method is ReversalMethod.SWITCH:
            starts = (c1 - h, c1)
            centers = (c1 - h / 2, c1 + h / 2)
        else:
            starts, centers = (c1 - h / 2,), (c1,)
    else:
        if method is ReversalMethod.WAIT:
            if trap.kind is TrapKind.OFF:
                raise ValueError("the wait method needs a trap")
            T_half = np.pi / trap.small_amplitude_frequency
            starts = (0.0, T_half)
        elif method is ReversalMethod.SWITCH:
            starts = (0.0, h)
        else:
            starts = (0.0,)
        centers = tuple(s + h / 2 for s in starts)
    k_signs = (1, -1) if method is ReversalMethod.SWITCH else (1,) * len(starts)
    sched = WindowSchedule(tuple(starts), k_signs, tuple(centers), h)
    if temperature > 0 and wavevector:
        sched.drift = window_drift(trap, sched, temperature, wavevector)
        rel = sched.drift.get("relative_phase_error", 0.0)
        if rel > 0.05:
            log.warning("pulse half longer than the flat-velocity window: relative Doppler "
                        "phase error %.3f", rel)
    return sched


def window_drift(trap: TrapConfig, sched: WindowSchedule, temperature: float,
                 wavevector: float) -> dict:
    """Doppler-phase deviation from constant velocity over each window (one-sigma atom)."""
    om = trap.small_amplitude_frequency if trap.kind is not TrapKind.OFF else 0.0
    sx, sv = thermal_std(temperature, trap.mass, om)
    t0 = min(sched.starts)
    grid = np.concatenate([np.linspace(s, s + sched.half_duration, 201) for s in sched.starts])
    x, v = ensemble_motion(trap, [sx, 0.0], [0.0, sv], grid, t0=t0)
    out = {}
    worst = 0.0
    for i, s in enumerate(sched.starts):
        sl = slice(201 * i, 201 * (i + 1))
        tt = grid[sl] - s
        for a in range(2):
            lin = x[a, sl][0] + v[a, sl][0] * tt
            dev = wavevector * np.max(np.abs(x[a, sl] - lin))
            scale = wavevector * max(abs(v[a, sl][0]) * sched.half_duration, 1e-300)
            worst = max(worst, dev / scale)
        out[f"velocity_change_{i}"] = float(np.max(np.abs(v[:, sl] - v[:, sl][:, :1])) / sv)
    out["relative_phase_error"] = float(worst)
    return out
