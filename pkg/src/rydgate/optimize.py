"""GRAPE-style synthesis of phase-modulated blockade gates.

Pulses are phase-only (``|Omega| = omega_max``).  First-order error states
are carried alongside the zeroth-order state in a block-triangular augmented
system; the phase gradient comes from one backward (adjoint) sweep.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import minimize

from . import _kernels
from .model import (ChannelKind, GateKind, GateTarget, Mode, PulseWaveform, Sector,
                    concatenate, rydberg_mask)
from .propagate import (_phase_mask, _unique_segments, evolve_exact, evolve_with_first_order,
                        rydberg_time, segment_propagators, bell_fidelity, SECTORS)

log = logging.getLogger(__name__)

SUCCESS_THRESHOLD = 1e-8
SMOOTHING_WEIGHT = 1e-6
MIN_DURATION_TOL = 0.02
DETOPT_FINAL_WEIGHT = 1e8
OPT_SECTORS = (Sector.S10, Sector.S11)


@dataclass(frozen=True)
class Penalty:
    sector: Sector
    channel: ChannelKind
    mode: Mode
    weight: float = 1.0


@dataclass(frozen=True)
class RobustnessSpec:
    """What the optimizer penalizes.

    ``penalties`` lists first-order error terms per sector (|01> terms are
    folded into the |10> ones with weight 2, since a global pulse treats both
    atoms alike).  ``halves == 2`` optimizes one half of a two-half gate.
    ``detuning_curvature`` switches to the second-order detuning objective
    ``C (1 - F) - F_c^(2)`` with ``C = detuning_curvature``.
    """

    name: str
    target: GateTarget = GateTarget()
    penalties: tuple = ()
    zeta: float = 0.0
    halves: int = 1
    detuning_curvature: float = 0.0

    def channels(self, sector: Sector):
        out = []
        for p in self.penalties:
            if p.sector is sector and p.channel not in out:
                out.append(p.channel)
        if self.detuning_curvature and sector is Sector.S10 and ChannelKind.DET_1 not in out:
            out.append(ChannelKind.DET_1)
        if self.detuning_curvature and sector is Sector.S11:
            for ch in (ChannelKind.DET_1, ChannelKind.DET_2):
                if ch not in out:
                    out.append(ch)
        return out


def _amp_penalties(mode, stark):
    kind10 = ChannelKind.STARK_PLUS if stark else ChannelKind.AMP_1
    kind11 = ChannelKind.STARK_PLUS if stark else ChannelKind.AMP_PLUS
    return (Penalty(Sector.S10, kind10, mode, 2.0), Penalty(Sector.S11, kind11, mode, 1.0))


def _det_penalties(mode):
    return (Penalty(Sector.S10, ChannelKind.DET_1, mode, 2.0),
            Penalty(Sector.S11, ChannelKind.DET_1, mode, 1.0),
            Penalty(Sector.S11, ChannelKind.DET_2, mode, 1.0))


CRZ = GateTarget(GateKind.CRZ_HALF_PI)


def make_spec(name: str, zeta: float = 0.0) -> RobustnessSpec:
    """Named pulse families.

    TO, AR, DR, ADR, CADR, SSR1, SSR2, SSR_ADR, SSR_CADR, DETOPT and DETFULL
    (full first-order detuning robustness, which has no solution).
    """
    n = name.upper().replace("-", "_")
    stark = zeta != 0 or n.startswith("SSR")
    if n == "TO":
        return RobustnessSpec("TO")
    if n == "AR":
        return RobustnessSpec("AR", penalties=_amp_penalties(Mode.FULL, False))
    if n == "SSR1":
        return RobustnessSpec("SSR1", penalties=_amp_penalties(Mode.FULL, True), zeta=zeta)
    if n == "SSR2":
        pen = _amp_penalties(Mode.FULL, True) + (
            Penalty(Sector.S11, ChannelKind.STARK_MINUS, Mode.FULL, 1.0),)
        return RobustnessSpec("SSR2", penalties=pen, zeta=zeta)
    if n == "DR":
        return RobustnessSpec("DR", CRZ, _det_penalties(Mode.LEAKAGE), halves=2)
    if n in ("ADR", "SSR_ADR"):
        st = n == "SSR_ADR" or stark
        return RobustnessSpec("SSR_ADR" if st else "ADR", CRZ,
                              _amp_penalties(Mode.FULL, st) + _det_penalties(Mode.LEAKAGE),
                              zeta=zeta if st else 0.0, halves=2)
    if n in ("CADR", "SSR_CADR"):
        # with the mid-gate reversal, conditional detuning robustness is automatic
        st = n == "SSR_CADR" or stark
        return RobustnessSpec("SSR_CADR" if st else "CADR", CRZ,
                              _amp_penalties(Mode.CONDITIONAL, st),
                              zeta=zeta if st else 0.0, halves=2)
    if n == "DETOPT":
        return RobustnessSpec("DETOPT", detuning_curvature=1e4)
    if n == "DETFULL":
        return RobustnessSpec("DETFULL", penalties=_det_penalties(Mode.FULL))
    raise ValueError(f"unknown pulse family {name!r}")


def default_segments(duration: float) -> int:
    return 350 if duration <= 16 else int(math.ceil(duration / 0.045))


# --------------------------------------------------------------------------
# cost


class _Problem:
    """Precomputed augmented propagators for one spec, grid and amplitude profile."""

    def __init__(self, spec: RobustnessSpec, amps: np.ndarray, dts: np.ndarray):
        self.spec = spec
        self.uniq, self.idx = _unique_segments(amps, dts)
        self.blocks = {}
        for sector in OPT_SECTORS:
            chans = spec.channels(sector)
            m0s = segment_propagators(sector, self.uniq, basis="w", zeta=spec.zeta,
                                      channels=chans)
            mask = _phase_mask(sector, len(chans) + 1)
            z0 = np.zeros(sector.dim * (len(chans) + 1), dtype=complex)
            z0[0] = 1.0
            self.blocks[sector] = (chans, m0s, mask, z0)

    def forward(self, phase):
        out = {}
        for sector, (chans, m0s, mask, z0) in self.blocks.items():
            theta = np.ascontiguousarray(np.outer(phase, mask))
            out[sector] = (theta, _kernels.forward(m0s, self.idx, theta, z0))
        return out

    def cost(self, phase, grad=True):
        fw = self.forward(phase)
        finals = {s: fw[s][1][-1] for s in OPT_SECTORS}
        J, gfin, parts = terminal_cost(self.spec, finals, self.blocks)
        if not grad:
            return J, None, parts
        g = np.zeros(len(phase))
        for sector, (chans, m0s, mask, z0) in self.blocks.items():
            theta, states = fw[sector]
            costates = _kernels.backward(m0s, self.idx, theta, gfin[sector])
            # d/dphi_s of exp(-i phi D) M0 exp(i phi D) contracted with states
            t = np.einsum("sa,sa->s", costates.conj() * mask, states)
            g += 2 * np.real(-1j * (t[1:] - t[:-1]))
        return J, g, parts


def _phase_derivs(w, s):
    """Derivatives of u = exp(-i theta10) and v = exp(-i theta11) w.r.t. w and conj(w)."""
    aw = abs(w)
    u = np.conj(w) / aw
    v = s * np.conj(w) / w
    du_dw, du_dwc = -np.conj(w) ** 2 / (2 * aw ** 3), 1 / (2 * aw)
    dv_dw, dv_dwc = -s * np.conj(w) / w ** 2, s / w
    return u, v, du_dw, du_dwc, dv_dw, dv_dwc


def _grad_of(X, dX_dw, dX_dwc):
    """d|X|^2 / d conj(w)."""
    return np.conj(X) * dX_dwc + X * np.conj(dX_dw)


def terminal_cost(spec: RobustnessSpec, finals: dict, blocks: dict):
    """Cost and conj-Wirtinger gradient with respect to the final augmented states."""
    s = np.exp(-1j * spec.target.conditional_phase)
    z10, z11 = finals[Sector.S10], finals[Sector.S11]
    w, y = z10[0], z11[0]
    if abs(w) < 1e-300:
        w = 1e-300
    u, v, du_dw, du_dwc, dv_dw, dv_dwc = _phase_derivs(w, s)
    S = 1 + 2 * abs(w) + v * y
    dS_dw = 2 * np.conj(w) / (2 * abs(w)) + y * dv_dw
    dS_dwc = 2 * w / (2 * abs(w)) + y * dv_dwc
    F = abs(S) ** 2 / 16
    g10 = np.zeros_like(z10)
    g11 = np.zeros_like(z11)
    C = spec.detuning_curvature or 1.0
    g10[0] -= C * _grad_of(S, dS_dw, dS_dwc) / 16
    g11[0] -= C * S * np.conj(v) / 16
    J = C * (1 - F)
    parts = {"infidelity": 1 - F}
    grads = {Sector.S10: g10, Sector.S11: g11}
    for p in spec.penalties:
        chans = blocks[p.sector][0]
        d = p.sector.dim
        c = chans.index(p.channel) + 1
        vec = finals[p.sector][c * d:(c + 1) * d]
        if p.mode is Mode.FULL:
            proj = vec
        elif p.mode is Mode.LEAKAGE:
            proj = vec * rydberg_mask(p.sector)
        else:
            proj = vec * (1 - rydberg_mask(p.sector))
        val = float(np.real(np.vdot(proj, proj)))
        J += p.weight * val
        key = f"{p.sector.value}:{p.channel.value}:{p.mode.value}"
        parts[key] = parts.get(key, 0.0) + val
        grads[p.sector][c * d:(c + 1) * d] += p.weight * proj
    if spec.detuning_curvature:
        chans10, chans11 = blocks[Sector.S10][0], blocks[Sector.S11][0]
        i10 = chans10.index(ChannelKind.DET_1) + 1
        i1, i2 = chans11.index(ChannelKind.DET_1) + 1, chans11.index(ChannelKind.DET_2) + 1
        a10 = z10[2 * i10]
        a11 = z11[3 * i1] + z11[3 * i2]
        X = 2 * u * a10 + v * a11
        fc2 = 0.25 * (2 * abs(a10) ** 2 + abs(a11) ** 2) - abs(X) ** 2 / 16
        J += fc2
        parts["minus_Fc2"] = fc2
        g10[2 * i10] += 0.5 * a10 - X * np.conj(2 * u) / 16
        g_a11 = 0.25 * a11 - X * np.conj(v) / 16
        g11[3 * i1] += g_a11
        g11[3 * i2] += g_a11
        dX_dw = 2 * a10 * du_dw + a11 * dv_dw
        dX_dwc = 2 * a10 * du_dwc + a11 * dv_dwc
        g10[0] -= _grad_of(X, dX_dw, dX_dwc) / 16
    return J, grads, parts


def cost_and_gradient(pulse: PulseWaveform, spec: RobustnessSpec):
    """Cost ``J`` and ``dJ/dphase`` for a pulse (amplitudes held fixed)."""
    prob = _Problem(spec, pulse.amp_scale, pulse.dts)
    J, g, _ = prob.cost(pulse.phase)
    return J, g


def cost_parts(pulse: PulseWaveform, spec: RobustnessSpec) -> dict:
    prob = _Problem(spec, pulse.amp_scale, pulse.dts)
    J, _, parts = prob.cost(pulse.phase, grad=False)
    parts["J"] = J
    return parts


# --------------------------------------------------------------------------
# optimization


@dataclass
class OptimizeResult:
    pulse: PulseWaveform
    J: float
    F: float
    residuals: dict
    iterations: int
    seed: int
    success: bool
    tau_R: dict = field(default_factory=dict)
    spec_name: str = ""

    def to_dict(self) -> dict:
        return {"spec": self.spec_name, "J": self.J, "F": self.F, "success": self.success,
                "iterations": self.iterations, "seed": self.seed,
                "duration": self.pulse.duration, "n_segments": self.pulse.n_segments,
                "halves": self.pulse.halves, "residuals": self.residuals, "tau_R": self.tau_R}


def _smoothness(phase, weight):
    d2 = phase[2:] - 2 * phase[1:-1] + phase[:-2]
    val = weight * float(np.dot(d2, d2))
    g = np.zeros_like(phase)
    g[2:] += 2 * weight * d2
    g[1:-1] -= 4 * weight * d2
    g[:-2] += 2 * weight * d2
    return val, g


def random_phases(n: int, rng: np.random.Generator) -> np.ndarray:
    raw = rng.uniform(-np.pi, np.pi, n)
    sm = gaussian_filter1d(raw, sigma=max(1.0, n / 25), mode="nearest")
    sm -= sm.mean()
    return sm * (np.pi / max(np.abs(sm).max(), 1e-12))


def _run_lbfgs(prob, phase, weight, maxiter, gtol=1e-14):
    def fun(x):
        J, g, _ = prob.cost(x)
        if weight:
            r, gr = _smoothness(x, weight)
            return J + r, g + gr
        return J, g

    res = minimize(fun, phase, jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "maxcor": 30, "gtol": gtol, "ftol": 1e-16,
                            "maxfun": 2 * maxiter})
    return res.x, res.nit


def polish(prob, phase, maxiter=20000, rounds=3):
    nit = 0
    for _ in range(rounds):
        phase, n = _run_lbfgs(prob, phase, 0.0, maxiter)
        nit += n
        if n < 5:
            break
    return phase, nit


def residual_norms(pulse: PulseWaveform, spec: RobustnessSpec) -> dict:
    """Robustness residuals from an independent forward pass of the full gate."""
    kinds = sorted({p.channel for p in spec.penalties} |
                   {ChannelKind.DET_1, ChannelKind.DET_2, ChannelKind.AMP_1, ChannelKind.AMP_2,
                    ChannelKind.AMP_PLUS}, key=lambda c: c.value)
    st = evolve_with_first_order(pulse, kinds, zeta=spec.zeta)
    out = {}
    for s in SECTORS:
        for ch, vec in st[s].psi1.items():
            out[f"{s.value}:{ch.value}"] = float(np.linalg.norm(vec))
            out[f"{s.value}:{ch.value}:computational"] = float(abs(vec[0]))
    return out


def finalize(phase, spec, duration, n_segments, amps=None, dts=None, nit=0, seed=0,
             label=None) -> OptimizeResult:
    amps = np.ones(n_segments) if amps is None else amps
    prob = _Problem(spec, amps, np.full(n_segments, duration / n_segments) if dts is None else dts)
    J, _, parts = prob.cost(phase, grad=False)
    J = max(J, 0.0)   # round-off in 1 - F can leave J at -1e-14
    half = PulseWaveform(n_segments, duration, phase, amps, label or spec.name,
                         segment_durations=dts)
    F = 1 - parts["infidelity"]
    gate = replace(half, halves=spec.halves) if spec.halves == 2 else half
    taus = rydberg_time(gate)
    gate.meta = {"spec": spec.name, "zeta": spec.zeta, "J": J, "tau_R": taus["avg"]}
    return OptimizeResult(gate, float(J), float(F), residual_norms(gate, spec), nit, seed,
                          J < SUCCESS_THRESHOLD, taus, spec.name)


def optimize_pulse(spec: RobustnessSpec, duration: float, n_segments: int | None = None,
                   seed: int = 0, n_restarts: int = 20, initial: np.ndarray | None = None,
                   maxiter: int = 4000, stop_at_success: bool = True) -> OptimizeResult:
    """Minimize the cost of ``spec`` over segment phases at fixed duration.

    Restarts draw smoothed uniform phases from ``seed``-derived generators.
    A smoothness-regularized stage precedes an unregularized polish.  The
    result reports ``success`` when ``J < SUCCESS_THRESHOLD``.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    n = n_segments or default_segments(duration)
    prob = _Problem(spec, np.ones(n), np.full(n, duration / n))
    best = None
    starts = []
    if initial is not None:
        starts.append(("warm", np.asarray(initial, float)))
    for r in range(n_restarts):
        starts.append((r, None))
    total_it = 0
    for tag, x0 in starts:
        if x0 is None:
            x0 = random_phases(n, np.random.default_rng([seed, tag]))
        x, nit = _run_lbfgs(prob, x0, SMOOTHING_WEIGHT, maxiter)
        x, nit2 = polish(prob, x, maxiter)
        total_it += nit + nit2
        J = prob.cost(x, grad=False)[0]
        log.debug("%s tau=%.4f restart=%s J=%.3e", spec.name, duration, tag, J)
        if best is None or J < best[0]:
            best = (J, x, tag)
        if stop_at_success and best[0] < SUCCESS_THRESHOLD:
            break
    J, x, tag = best
    res = finalize(x, spec, duration, n, nit=total_it, seed=seed)
    return res


@dataclass
class MinimalDurationResult:
    feasible: bool
    tau_star: float
    best: OptimizeResult | None
    history: list

    def to_dict(self):
        return {"feasible": self.feasible, "tau_star": self.tau_star,
                "history": [(float(t), float(j)) for t, j in self.history]}


def find_minimal_duration(spec: RobustnessSpec, lower: float, upper: float,
                          tolerance: float = MIN_DURATION_TOL, seed: int = 0,
                          n_restarts: int = 20, n_segments: int | None = None,
                          max_upper: float = 40.0) -> MinimalDurationResult:
    """Bisection on duration with ``optimize_pulse`` as feasibility oracle.

    ``upper`` is doubled (up to ``max_upper``) until a solution exists; if
    none is found ``spec`` is reported infeasible.  Feasible solutions warm
    start the next, shorter trial.
    """
    history = []
    hi_res = None
    hi = upper
    while True:
        hi_res = optimize_pulse(spec, hi, n_segments, seed, n_restarts)
        history.append((hi, hi_res.J))
        if hi_res.success:
            break
        if hi >= max_upper:
            return MinimalDurationResult(False, math.inf, hi_res, history)
        lower, hi = hi, min(max_upper, 2 * hi)
    lo = lower
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        n = n_segments or default_segments(mid)
        warm = hi_res.pulse.resampled(n, mid).phase
        res = optimize_pulse(spec, mid, n, seed, n_restarts, initial=warm)
        history.append((mid, res.J))
        log.info("%s bisection tau=%.4f J=%.3e", spec.name, mid, res.J)
        if res.success:
            hi, hi_res = mid, res
        else:
            lo = mid
    return MinimalDurationResult(True, hi, hi_res, history)


# --------------------------------------------------------------------------
# second-order detuning sensitivity


def detuning_second_order(pulse: PulseWaveform, target: GateTarget = GateTarget(),
                          tol: float = 1e-6):
    """Split of ``-F^(2)`` for equal detunings on both atoms.

    Returns ``(-F2, -Fc2, -Fr2)`` computed from the first-order states: the
    conditional part from the computational overlaps (which equal
    ``-i exp(i theta_q) tau_q`` for a perfect gate) and the Rydberg part from
    the leakage amplitudes.
    """
    st = evolve_with_first_order(pulse, [ChannelKind.DET_1, ChannelKind.DET_2])
    rep = bell_fidelity(st, target)
    if 1 - rep.F > tol:
        raise ValueError(f"pulse does not implement the target gate (1-F={1 - rep.F:.2e})")
    theta = {Sector(k): v for k, v in rep.theta.items()}
    a, leak = {}, {}
    for s in SECTORS:
        vec = sum(st[s].psi1[ch] for ch in (ChannelKind.DET_1, ChannelKind.DET_2)
                  if ch in st[s].psi1)
        a[s] = np.exp(-1j * theta[s]) * vec[0]
        leak[s] = float(np.sum(np.abs(vec[1:]) ** 2))
    total = sum(a.values())
    mfc2 = 0.25 * sum(abs(a[s]) ** 2 for s in SECTORS) - abs(total) ** 2 / 16
    mfr2 = 0.25 * sum(leak.values())
    return mfc2 + mfr2, mfc2, mfr2


def detuning_curvature_fit(pulse: PulseWaveform, deltas=None) -> float:
    """``-F^(2)`` from a quadratic fit of ``1-F(Delta)`` with equal detunings."""
    from .model import Errors
    if deltas is None:
        deltas = np.linspace(-2e-3, 2e-3, 9)
    theta = {Sector(k): v for k, v in bell_fidelity(evolve_exact(pulse)).theta.items()}
    infid = []
    for d in deltas:
        rep = bell_fidelity(evolve_exact(pulse, Errors(delta1=d, delta2=d)), phase_policy="frozen",
                            theta=theta)
        infid.append(1 - rep.F)
    coef = np.polyfit(deltas, infid, 4)
    return float(coef[2])


def optimize_detuning_optimal(n_segments: int = 350, seed: int = 0, n_restarts: int = 20,
                              bounds=(7.6, 7.9), tol: float = 5e-3,
                              initial: PulseWaveform | None = None):
    """Pulse minimizing the conditional second-order detuning error at ``F = 1``.

    The duration is chosen by a bounded scalar minimization of the optimized
    cost; phases are warm-started between durations.  The cost is nearly
    flat in the duration near its minimum, so a bounded search is used
    rather than a bracketing one.
    """
    from scipy.optimize import minimize_scalar
    spec = make_spec("DETOPT")
    cache = {}
    state = {"phase": None if initial is None else initial.resampled(n_segments).phase}

    def inner(tau):
        tau = float(tau)
        if tau in cache:
            return cache[tau][0]
        prob = _Problem(spec, np.ones(n_segments), np.full(n_segments, tau / n_segments))
        if state["phase"] is None:
            res = optimize_pulse(spec, tau, n_segments, seed, n_restarts)
            x = res.pulse.phase
        else:
            x, _ = polish(prob, state["phase"])
        J, _, parts = prob.cost(x, grad=False)
        state["phase"] = x
        cache[tau] = (J, x, parts)
        log.info("DETOPT tau=%.4f J=%.6f 1-F=%.2e", tau, J, parts["infidelity"])
        return J

    res = minimize_scalar(inner, bounds=bounds, method="bounded", options={"xatol": tol})
    tau = float(res.x)
    inner(tau)
    x = cache[tau][1]
    # 1 - F left by C = 1e4 is ~1e-8; a stiff final polish makes the gate
    # exact (1 - F ~ 1/C^2) while moving -F_c^(2) by < 1e-6.
    stiff = replace(spec, detuning_curvature=DETOPT_FINAL_WEIGHT)
    x, _ = polish(_Problem(stiff, np.ones(n_segments), np.full(n_segments, tau / n_segments)), x)
    return finalize(x, stiff, tau, n_segments, seed=seed, label="DETOPT")


# --------------------------------------------------------------------------
# composite detuning-compensated pulse


@dataclass
class CompositeParameters:
    phi1: float
    phi2: float
    tau1: float
    tau2: float
    xi1: complex
    xi2: complex


def composite_parameters(omega_star: PulseWaveform, tau_on: float,
                         target: GateTarget = GateTarget()) -> CompositeParameters:
    """Solve the 2x2 system cancelling the first-order Rydberg error of ``omega_star``."""
    st = evolve_with_first_order(omega_star, [ChannelKind.DET_1, ChannelKind.DET_2])
    rep = bell_fidelity(st, target)
    t10, t11 = rep.theta["10"], rep.theta["11"]
    b10 = st[Sector.S10].psi1[ChannelKind.DET_1][1]
    v11 = st[Sector.S11].psi1[ChannelKind.DET_1] + st[Sector.S11].psi1[ChannelKind.DET_2]
    b11 = v11[1]
    A = 0.5 * np.array([[np.exp(-1j * t10), np.exp(1j * t10)],
                        [math.sqrt(2) * np.exp(-1j * t11), math.sqrt(2) * np.exp(1j * t11)]])
    if abs(np.linalg.det(A)) < 1e-10:
        raise np.linalg.LinAlgError("degenerate phases: composite system is singular")
    xi = np.linalg.solve(A, np.array([b10, b11]))
    phis = -np.angle(xi)
    taus = np.abs(xi) / tau_on
    return CompositeParameters(float(phis[0]), float(phis[1]), float(taus[0]), float(taus[1]),
                               complex(xi[0]), complex(xi[1]))


def build_composite_detuning_pulse(omega_star: PulseWaveform, tau_on: float,
                                   params: CompositeParameters | None = None) -> PulseWaveform:
    """Seven-part pulse: kick, idle, counter-kick, ``omega_star``, kick, idle, counter-kick."""
    p = params or composite_parameters(omega_star, tau_on)

    def part(phase, amp, dur):
        return PulseWaveform(1, dur, [phase], [amp], segment_durations=[dur])

    pieces = [part(p.phi1, 1.0, tau_on), part(0.0, 0.0, p.tau1), part(p.phi1 + np.pi, 1.0, tau_on),
              PulseWaveform(omega_star.n_segments, omega_star.duration, omega_star.phase,
                            omega_star.amp_scale, segment_durations=omega_star.dts),
              part(p.phi2, 1.0, tau_on), part(0.0, 0.0, p.tau2), part(p.phi2 + np.pi, 1.0, tau_on)]
    out = concatenate(*pieces, label="COMPOSITE")
    out.meta = {"tau_on": tau_on, "phi1": p.phi1, "phi2": p.phi2, "tau1": p.tau1, "tau2": p.tau2}
    return out
