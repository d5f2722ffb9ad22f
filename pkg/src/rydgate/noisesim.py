"""Gate errors under amplitude noise, thermal motion and Rydberg decay.

Doppler shifts are applied in the rotating frame of each atom's laser
phase: the drive ``exp(-i s k x(t)) Omega(t)`` becomes a detuning
``s k v(t)`` on that atom's Rydberg state, with the frame phase re-applied
wherever ``s`` (the laser direction) changes.  This is equivalent to the
phase form used by :func:`rydgate.propagate.evolve_exact` and avoids
resolving the optical phase in time.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import _kernels
from .model import GateTarget, PhysicalParams, PulseWaveform
from .propagate import fidelity_from_finals, ideal_phases
from .model import Sector
from .trap import (ReversalMethod, TrapConfig, TrapKind, ensemble_motion, pulse_window_schedule,
                   thermal_std)

log = logging.getLogger(__name__)

CHUNK = 256
# Doppler phases move on the trap time scale (~1e3 / omega_max), so one
# midpoint per ~0.05 is converged to 1e-12 in F.
NOISE_DOPPLER_STEP = 0.05


class Sampler(enum.Enum):
    QUADRATURE = "QUADRATURE"
    MONTE_CARLO = "MONTE_CARLO"


@dataclass(frozen=True)
class NoiseModel:
    """Imperfections of one experimental setting.

    ``trap`` defaults to a harmonic (or, with ``modulation``, sinusoidally
    modulated) trap at ``params.trap_freq``.  ``decay`` and ``stark`` switch
    the Rydberg decay and the amplitude-correlated light shift on and off.
    The quadrature sampler uses ``nodes`` Gauss-Hermite points per active
    dimension up to ``max_quadrature_dims`` dimensions (``high_dim_nodes``
    maps larger dimension counts to a node count); beyond that it falls back
    to ``shots`` Monte Carlo samples.
    """

    sigma_eps: float = 0.0
    temperature: float = 0.0
    params: PhysicalParams = PhysicalParams()
    trap: TrapConfig | None = None
    reversal: ReversalMethod = ReversalMethod.WAIT
    modulation: bool = True
    correlated_eps: bool = True
    sampler: Sampler = Sampler.QUADRATURE
    shots: int = 4000
    nodes: int = 15
    max_quadrature_dims: int = 3
    high_dim_nodes: tuple = ()
    seed: int = 0
    decay: bool = True
    stark: bool = True
    doppler_step: float = NOISE_DOPPLER_STEP

    def __post_init__(self):
        if self.sigma_eps < 0 or self.temperature < 0:
            raise ValueError("sigma_eps and temperature must be non-negative")
        if self.sampler is Sampler.MONTE_CARLO and self.shots < 100:
            raise ValueError("Monte Carlo needs at least 100 shots")

    def resolved_trap(self) -> TrapConfig:
        if self.trap is not None:
            return self.trap
        p = self.params
        if self.modulation:
            return TrapConfig.modulated_for(p.trap_freq, p.mass)
        return TrapConfig.harmonic(p.trap_freq, mass=p.mass)


@dataclass
class GateErrorBudget:
    F: float
    F_err: float
    Fc: float
    Fc_err: float
    p_d: float
    p_d_err: float
    p_e: float
    p_p: float
    R_e: float
    eta_e: float
    label: str = ""
    sigma_eps: float = 0.0
    T_K: float = 0.0
    seed: int = 0
    n_samples: int = 1
    diagnostics: dict = field(default_factory=dict)
    p_L: float | None = None

    @property
    def infidelity(self) -> float:
        return 1 - self.F

    def to_row(self) -> dict:
        return {"pulse_label": self.label, "sigma_eps": self.sigma_eps, "T_K": self.T_K,
                "F": self.F, "F_err": self.F_err, "Fc": self.Fc, "Fc_err": self.Fc_err,
                "p_d": self.p_d, "p_e": self.p_e, "p_p": self.p_p, "eta_e": self.eta_e,
                "p_L": "" if self.p_L is None else self.p_L, "seed": self.seed}


CSV_COLUMNS = ["pulse_label", "sigma_eps", "T_K", "F", "F_err", "Fc", "Fc_err", "p_d", "p_e",
               "p_p", "eta_e", "p_L", "seed"]


# --------------------------------------------------------------------------
# erasure channel


@dataclass(frozen=True)
class ErasureSplit:
    p_e: float
    p_p: float
    R_e: float
    eta_e: float
    no_error: bool = False
    R_e_alt: float = float("nan")


def erasure_channel(F: float, F_c: float, p_d: float, r: float) -> ErasureSplit:
    """Split gate errors into heralded erasures and undetected Pauli errors.

    ``p_e = r p_d``, ``p_p = (1 - r) p_d + (1 - p_d)(1 - F_c)``,
    ``R_e = p_e / (p_e + p_p)`` and ``eta_e = 1 / (1 - R_e)``.  ``F`` is not
    needed by the split and only validated.  With no error at all ``eta_e``
    is ``inf`` and ``no_error`` is set.  ``R_e_alt`` uses ``p_e + p_d`` in
    the denominator instead (diagnostic only).
    """
    for name, val in (("F", F), ("F_c", F_c), ("p_d", p_d), ("r", r)):
        if not -1e-12 <= val <= 1 + 1e-12:
            raise ValueError(f"{name} must lie in [0, 1]")
    p_e = r * p_d
    p_p = (1 - r) * p_d + (1 - p_d) * (1 - F_c)
    alt = p_e / (p_e + p_d) if p_e + p_d > 0 else float("nan")
    if p_e + p_p <= 0:
        return ErasureSplit(p_e, p_p, float("nan"), math.inf, True, alt)
    R_e = p_e / (p_e + p_p)
    eta = math.inf if R_e >= 1 else 1 / (1 - R_e)
    return ErasureSplit(p_e, p_p, R_e, eta, False, alt)


# --------------------------------------------------------------------------
# sampling


@dataclass
class _Samples:
    eps1: np.ndarray
    eps2: np.ndarray
    x0: np.ndarray      # (B, 2)
    v0: np.ndarray      # (B, 2)
    scale: np.ndarray   # (B, 2) trap-frequency factors
    weights: np.ndarray
    monte_carlo: bool


def _draw(noise: NoiseModel, sx: float, sv: float, sigma_omega: float) -> _Samples:
    dims = []
    if noise.sigma_eps > 0:
        dims += ["eps1"] if noise.correlated_eps else ["eps1", "eps2"]
    if noise.temperature > 0:
        if sx > 0:
            dims += ["x1", "x2"]
        dims += ["v1", "v2"]
        if sigma_omega > 0:
            dims += ["w1", "w2"]
    sig = {"eps1": noise.sigma_eps, "eps2": noise.sigma_eps, "x1": sx, "x2": sx, "v1": sv,
           "v2": sv, "w1": sigma_omega, "w2": sigma_omega}
    d = len(dims)
    high = dict(noise.high_dim_nodes)
    mc = noise.sampler is Sampler.MONTE_CARLO or (d > noise.max_quadrature_dims and d not in high)
    if d == 0:
        pts, w = np.zeros((1, 0)), np.ones(1)
        mc = False
    elif mc:
        rng = np.random.default_rng(noise.seed)
        pts = rng.standard_normal((noise.shots, d))
        w = np.full(noise.shots, 1.0 / noise.shots)
    else:
        n = high.get(d, noise.nodes)
        x, wx = hermegauss(n)
        wx = wx / wx.sum()
        grids = np.meshgrid(*([x] * d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        w = np.prod(np.stack(np.meshgrid(*([wx] * d), indexing="ij")), axis=0).ravel()
    B = len(w)
    vals = {k: np.zeros(B) for k in sig}
    for i, k in enumerate(dims):
        vals[k] = sig[k] * pts[:, i]
    if noise.correlated_eps:
        vals["eps2"] = vals["eps1"]
    return _Samples(vals["eps1"], vals["eps2"], np.stack([vals["x1"], vals["x2"]], 1),
                    np.stack([vals["v1"], vals["v2"]], 1),
                    1 + np.stack([vals["w1"], vals["w2"]], 1), w, mc)


# --------------------------------------------------------------------------
# gate simulation


def _substeps(pulse: PulseWaveform, step: float):
    dts = pulse.dts
    n_sub = np.maximum(1, np.ceil(dts / step - 1e-9)).astype(int)
    seg = np.repeat(np.arange(pulse.n_segments), n_sub)
    h = np.repeat(dts / n_sub, n_sub)
    mid = np.concatenate([[0.0], np.cumsum(h)[:-1]]) + 0.5 * h
    return seg, h, mid


def _gate_layout(pulse: PulseWaveform, noise: NoiseModel, trap: TrapConfig):
    p = noise.params
    half_si = pulse.duration / p.omega_max
    if pulse.halves == 2:
        if noise.reversal is ReversalMethod.NONE:
            raise ValueError("two-half pulses need the switch or wait method")
        method = noise.reversal
    else:
        method = ReversalMethod.NONE
    if method is ReversalMethod.WAIT and trap.kind is TrapKind.OFF:
        raise ValueError("the wait method needs a trap")
    return pulse_window_schedule(trap, method, half_si)


def simulate_gate(pulse: PulseWaveform, noise: NoiseModel, target: GateTarget = GateTarget(),
                  label: str | None = None, theta: dict | None = None) -> GateErrorBudget:
    """Average gate performance over the noise model's disorder.

    Per sample: amplitude errors, initial positions and velocities of both
    atoms (thermal, at the start of the gate) and trap-frequency factors.
    Single-qubit phases are frozen at their ideal values.  Returns the mean
    Bell fidelity, conditional fidelity and decay probability with standard
    errors (zero for quadrature) and the erasure split.
    """
    p = noise.params
    trap = noise.resolved_trap()
    sched = _gate_layout(pulse, noise, trap)
    theta = theta or ideal_phases(pulse, target)
    gamma = p.gamma_dimless if noise.decay else 0.0
    zeta = p.zeta if noise.stark else 0.0

    seg, h, mid = _substeps(pulse, noise.doppler_step)
    n_half = len(seg)
    nh = pulse.halves
    amp = np.tile(pulse.amp_scale[seg], nh)
    phase = np.tile(pulse.phase[seg], nh)
    hh = np.tile(h, nh)
    # absolute SI times of sub-step midpoints, plus half boundaries
    t_mid = np.concatenate([sched.starts[i] + mid / p.omega_max for i in range(nh)])
    t_edges = np.array([sched.starts[0] + pulse.duration / p.omega_max,
                        sched.starts[-1]]) if nh == 2 else np.zeros(0)
    om_tr = trap.small_amplitude_frequency if trap.kind is not TrapKind.OFF else 0.0
    sx, sv = thermal_std(noise.temperature, p.mass, om_tr) if noise.temperature > 0 else (0, 0)
    samples = _draw(noise, sx, sv, trap.sigma_omega)
    B = len(samples.weights)
    k = p.wavevector
    ksign = np.repeat(np.array(sched.k_signs, float), n_half)
    jump_idx = n_half if nh == 2 else -1
    gap = (sched.starts[-1] - sched.starts[0]) * p.omega_max - pulse.duration if nh == 2 else 0.0
    decay_gap = math.exp(-0.5 * gamma * gap)

    F = np.empty(B)
    Fc = np.empty(B)
    pd = np.empty(B)
    t0 = sched.starts[0]
    moving = noise.temperature > 0
    all_t = np.concatenate([t_mid, t_edges])
    order = np.argsort(all_t, kind="stable")
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    for c0 in range(0, B, CHUNK):
        sl = slice(c0, min(B, c0 + CHUNK))
        nb = sl.stop - sl.start
        det = [np.zeros((nb, len(t_mid))), np.zeros((nb, len(t_mid)))]
        jumps = [np.full(nb, decay_gap, dtype=complex), np.full(nb, decay_gap, dtype=complex)]
        if moving:
            for a in range(2):
                sc = samples.scale[sl, a] if trap.sigma_omega > 0 else None
                x, v = ensemble_motion(trap, samples.x0[sl, a], samples.v0[sl, a],
                                       all_t[order], scale=sc, t0=t0)
                x, v = x[:, inv], v[:, inv]
                det[a] = ksign * k * v[:, :len(t_mid)] / p.omega_max
                if nh == 2:
                    s1, s2 = sched.k_signs
                    xe, xs = x[:, len(t_mid)], x[:, len(t_mid) + 1]
                    jumps[a] = decay_gap * np.exp(1j * k * (s1 * xe - s2 * xs))
        f10, f01, f11 = _kernels.doppler_batch(amp, phase, hh, samples.eps1[sl], samples.eps2[sl],
                                               det[0], det[1], jump_idx, jumps[0], jumps[1],
                                               gamma, zeta)
        finals = {Sector.S10: f10, Sector.S01: f01, Sector.S11: f11}
        F[sl], Fc[sl], pd[sl] = fidelity_from_finals(finals, theta)
    w = samples.weights

    def mean_err(x):
        m = float(np.sum(w * x))
        if not samples.monte_carlo or B < 2:
            return m, 0.0
        return m, float(np.std(x, ddof=1) / math.sqrt(B))

    (Fm, Fe), (Fcm, Fce), (pdm, pde) = mean_err(F), mean_err(Fc), mean_err(pd)
    Fm, Fcm, pdm = min(max(Fm, 0.0), 1.0), min(max(Fcm, 0.0), 1.0), min(max(pdm, 0.0), 1.0)
    split = erasure_channel(Fm, Fcm, pdm, p.erasure_fraction)
    return GateErrorBudget(Fm, Fe, Fcm, Fce, pdm, pde, split.p_e, split.p_p, split.R_e,
                           split.eta_e, label or pulse.label, noise.sigma_eps, noise.temperature,
                           noise.seed, B, {"R_e_alt": split.R_e_alt, "monte_carlo":
                                           samples.monte_carlo, "drift": sched.drift})


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    sigma_grid: np.ndarray
    T_grid: np.ndarray
    budgets: dict            # label -> 2-D list [i_sigma][i_T] of GateErrorBudget
    argmin: np.ndarray       # best label per cell (by 1 - F)

    def rows(self):
        for lab, grid in self.budgets.items():
            for row in grid:
                for b in row:
                    yield b.to_row()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            wr.writeheader()
            for r in self.rows():
                wr.writerow(r)

    def metric(self, label, key="F"):
        return np.array([[getattr(b, key) for b in row] for row in self.budgets[label]])


def sweep(pulses: dict, sigma_grid, T_grid, base: NoiseModel = NoiseModel(),
          metric: str = "infidelity") -> SweepResult:
    """Budgets for every pulse on a (sigma_eps, T) grid, and the best pulse per cell."""
    sigma_grid = np.atleast_1d(np.asarray(sigma_grid, float))
    T_grid = np.atleast_1d(np.asarray(T_grid, float))
    if sigma_grid.size == 0 or T_grid.size == 0:
        raise ValueError("sweep grids must be non-empty")
    budgets = {}
    for lab, pulse in pulses.items():
        theta = ideal_phases(pulse, GateTarget())
        budgets[lab] = [[simulate_gate(pulse, replace(base, sigma_eps=s, temperature=T),
                                       label=lab, theta=theta) for T in T_grid]
                        for s in sigma_grid]
    labels = list(pulses)
    best = np.empty((len(sigma_grid), len(T_grid)), dtype=object)
    for i in range(len(sigma_grid)):
        for j in range(len(T_grid)):
            vals = [_metric(budgets[l][i][j], metric) for l in labels]
            best[i, j] = labels[int(np.argmin(vals))]
    return SweepResult(sigma_grid, T_grid, budgets, best)


def _metric(b: GateErrorBudget, metric: str) -> float:
    if metric == "infidelity":
        return 1 - b.F
    if metric == "conditional":
        return 1 - b.Fc
    if metric == "p_L":
        return math.inf if b.p_L is None else b.p_L
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class Crossover:
    value: float
    stderr: float
    found: bool


def crossover(x, err_a, err_b, se_a=None, se_b=None, n_boot: int = 200, seed: int = 0,
              log_x: bool = False) -> Crossover:
    """Where two error curves cross (cubic interpolation of the log-ratio).

    With standard errors, a parametric bootstrap of the curves gives the
    uncertainty of the crossing.
    """
    x = np.asarray(x, float)
    xx = np.log(x) if log_x else x

    def root(a, b):
        d = np.log(np.asarray(a)) - np.log(np.asarray(b))
        exact = np.flatnonzero(d == 0)
        if len(exact):
            return float(x[exact[0]])
        sgn = np.where(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]
        if len(sgn) == 0:
            return math.nan
        i = sgn[0]
        cs = CubicSpline(xx, d)
        r = brentq(cs, xx[i], xx[i + 1])
        return math.exp(r) if log_x else r

    val = root(err_a, err_b)
    if se_a is None or se_b is None or math.isnan(val):
        return Crossover(val, 0.0, not math.isnan(val))
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        a = np.maximum(np.asarray(err_a) + rng.standard_normal(len(x)) * se_a, 1e-300)
        b = np.maximum(np.asarray(err_b) + rng.standard_normal(len(x)) * se_b, 1e-300)
        r = root(a, b)
        if not math.isnan(r):
            boots.append(r)
    return Crossover(val, float(np.std(boots)) if len(boots) > 1 else 0.0, True)


# --------------------------------------------------------------------------
# trap studies


def _fit_loglog(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def anharmonicity_study(pulse: PulseWaveform, base: NoiseModel, U0_grid, w0: float,
                        label: str = "") -> dict:
    """Wait-method budgets in a Gaussian tweezer of depth ``U0`` (J) and waist ``w0``.

    ``excess_conditional`` is the conditional infidelity beyond that of a
    harmonic trap with the same small-oscillation frequency; its log-log
    slope against ``U0`` is returned as ``exponent``.
    """
    rows = []
    theta = ideal_phases(pulse, GateTarget())
    for U0 in np.atleast_1d(U0_grid):
        g = TrapConfig.gaussian(U0, w0, base.params.mass)
        h = TrapConfig.harmonic(g.small_amplitude_frequency, mass=base.params.mass)
        nm = replace(base, reversal=ReversalMethod.WAIT, modulation=False)
        bg = simulate_gate(pulse, replace(nm, trap=g), label=label, theta=theta)
        bh = simulate_gate(pulse, replace(nm, trap=h), label=label, theta=theta)
        rows.append({"U0": float(U0), "omega_tr": g.small_amplitude_frequency, "budget": bg,
                     "harmonic": bh, "eta_e": bg.eta_e,
                     "excess_conditional": (1 - bg.Fc) - (1 - bh.Fc)})
    expo = _fit_loglog([r["U0"] for r in rows], [r["excess_conditional"] for r in rows])
    return {"rows": rows, "exponent": expo}


def frequency_jitter_study(pulse: PulseWaveform, base: NoiseModel, sigma_grid,
                           label: str = "") -> dict:
    """Wait-method budgets versus the relative trap-frequency spread.

    Returns the rows and the least-squares coefficient ``c`` in
    ``1 - F = (1 - F_0) + c sigma^2``.
    """
    trap = base.resolved_trap()
    theta = ideal_phases(pulse, GateTarget())
    rows = []
    for s in np.atleast_1d(sigma_grid):
        t = replace(trap, sigma_omega=float(s))
        b = simulate_gate(pulse, replace(base, reversal=ReversalMethod.WAIT, trap=t), label=label,
                          theta=theta)
        rows.append({"sigma_omega": float(s), "budget": b, "infidelity": 1 - b.F,
                     "conditional_infidelity": 1 - b.Fc, "eta_e": b.eta_e})
    s2 = np.array([r["sigma_omega"] for r in rows]) ** 2
    y = np.array([r["infidelity"] for r in rows])
    base_inf = y[np.argmin(s2)]
    c = float(np.dot(s2, y - base_inf) / np.dot(s2, s2)) if np.any(s2 > 0) else 0.0
    return {"rows": rows, "coefficient": c}


def no_modulation_comparison(pulses: dict, base: NoiseModel) -> list:
    """Budgets for switch and wait, with and without trap modulation."""
    out = []
    for lab, pulse in pulses.items():
        theta = ideal_phases(pulse, GateTarget())
        for method in (ReversalMethod.SWITCH, ReversalMethod.WAIT):
            for mod in (True, False):
                nm = replace(base, reversal=method, modulation=mod, trap=None)
                b = simulate_gate(pulse, nm, label=lab, theta=theta)
                out.append({"label": lab, "method": method.value, "modulation": mod,
                            "budget": b})
    return out
