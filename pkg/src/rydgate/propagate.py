"""Time evolution of the three driven sectors, fidelities and Rydberg-time bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from . import _kernels
from .model import (NO_ERRORS, ChannelKind, Errors, GateTarget, PulseWaveform, Sector,
                    build_sector, perturbation_generator, rydberg_mask)

SECTORS = (Sector.S10, Sector.S01, Sector.S11)
DOPPLER_STEP = 0.005
DETUNING_CHANNELS = (ChannelKind.DET_1, ChannelKind.DET_2)


@dataclass
class SectorState:
    sector: Sector
    psi0: np.ndarray
    psi1: dict = field(default_factory=dict)
    norm_history: np.ndarray | None = None
    basis: str = "exact"

    @property
    def overlap(self) -> complex:
        return complex(self.psi0[0])


@dataclass
class FidelityReport:
    F: float
    F_c: float
    theta: dict
    tau_R: dict | None = None
    p_d: float = 0.0

    def to_dict(self) -> dict:
        d = {"F": self.F, "F_c": self.F_c, "p_d": self.p_d,
             "theta": {k: float(v) for k, v in self.theta.items()}}
        if self.tau_R is not None:
            d["tau_R"] = {k: float(v) for k, v in self.tau_R.items()}
        return d


class DegenerateInputError(ValueError):
    pass


# --------------------------------------------------------------------------
# segment tables


def _unique_segments(amps, dts):
    keys = np.round(np.stack([amps, dts], axis=1), 14)
    uniq, idx = np.unique(keys, axis=0, return_inverse=True)
    return uniq, idx.reshape(-1).astype(np.int64)


def _generator(sector, amp, errors, gamma, basis, zeta, channels=(), signs=None):
    """Augmented generator at zero drive phase (block lower triangular)."""
    h0 = build_sector(sector, amp, errors, gamma, basis, zeta)
    d = h0.shape[0]
    k = len(channels)
    A = np.zeros((d * (k + 1), d * (k + 1)), dtype=complex)
    for b in range(k + 1):
        A[b * d:(b + 1) * d, b * d:(b + 1) * d] = h0
    for c, ch in enumerate(channels):
        s = 1.0 if signs is None else signs[c]
        A[(c + 1) * d:(c + 2) * d, :d] = s * perturbation_generator(sector, ch, zeta, amp)
    return A


def _phase_mask(sector, n_blocks=1):
    return np.tile(rydberg_mask(sector), n_blocks)


def segment_propagators(sector, uniq, errors=NO_ERRORS, gamma=0.0, basis="exact", zeta=0.0,
                        channels=(), signs=None):
    return np.array([expm(-1j * dt * _generator(sector, a, errors, gamma, basis, zeta,
                                                  channels, signs))
                     for a, dt in uniq])


def _substep_grid(pulse: PulseWaveform, step: float, t0: float = 0.0):
    """Split every segment into equal sub-steps no longer than ``step``."""
    dts = pulse.dts
    n_sub = np.maximum(1, np.ceil(dts / step - 1e-9)).astype(int)
    seg = np.repeat(np.arange(pulse.n_segments), n_sub)
    h = np.repeat(dts / n_sub, n_sub)
    starts = t0 + np.concatenate([[0.0], np.cumsum(h)[:-1]])
    return seg, h, starts + 0.5 * h


def _doppler_theta(sector, basis, phase, kx1, kx2):
    n = len(phase)
    if sector is Sector.S10:
        return np.stack([np.zeros(n), phase - kx1], axis=1)
    if sector is Sector.S01:
        return np.stack([np.zeros(n), phase - kx2], axis=1)
    if basis != "exact":
        raise ValueError("per-atom Doppler phases need the exact |11> basis")
    return np.stack([np.zeros(n), phase - kx1, phase - kx2], axis=1)


def _initial(sector, basis="exact", n_blocks=1):
    z = np.zeros(sector.dim * n_blocks, dtype=complex)
    z[0] = 1.0
    return z


# --------------------------------------------------------------------------
# evolution


def evolve_exact(pulse: PulseWaveform, errors: Errors = NO_ERRORS, gamma: float = 0.0,
                 doppler=None, basis: str = "exact", zeta: float = 0.0,
                 reverse_detuning: bool = True, history: bool = False,
                 sectors=SECTORS) -> dict:
    """Final zeroth-order state of every sector.

    ``doppler`` is an optional callable mapping gate times (units 1/omega_max)
    to the Doppler phases ``(k x1(t), k x2(t))``; the drive seen by atom i is
    then ``exp(-i k x_i(t)) * Omega(t)``, sampled at sub-step midpoints no
    longer than ``DOPPLER_STEP``.  For two-half pulses the static detunings
    flip sign in the second half when ``reverse_detuning`` is set.
    """
    out = {}
    half_errors = [errors]
    if pulse.halves == 2:
        flipped = Errors(errors.eps1, errors.eps2,
                         -errors.delta1 if reverse_detuning else errors.delta1,
                         -errors.delta2 if reverse_detuning else errors.delta2)
        half_errors.append(flipped)
    for sector in sectors:
        z = _initial(sector)
        norms = [np.array([1.0])]
        for h, err in enumerate(half_errors):
            t0 = h * pulse.duration
            if doppler is None:
                uniq, idx = _unique_segments(pulse.amp_scale, pulse.dts)
                theta = np.outer(pulse.phase, _phase_mask(sector))
            else:
                seg, hs, tmid = _substep_grid(pulse, DOPPLER_STEP, t0)
                uniq, idx = _unique_segments(pulse.amp_scale[seg], hs)
                kx1, kx2 = doppler(tmid)
                theta = _doppler_theta(sector, basis, pulse.phase[seg], kx1, kx2)
            m0s = segment_propagators(sector, uniq, err, gamma, basis, zeta)
            states = _kernels.forward(m0s, idx, np.ascontiguousarray(theta), z)
            z = states[-1]
            if history:
                norms.append(np.sum(np.abs(states[1:]) ** 2, axis=1))
        out[sector] = SectorState(sector, z, norm_history=np.concatenate(norms) if history else None,
                                  basis=basis if sector is Sector.S11 else "exact")
    return out


def default_channels(kinds) -> dict:
    """Map a channel list onto the sectors it acts on (W basis)."""
    from .model import _APPLICABLE
    return {s: [k for k in kinds if k in _APPLICABLE[s]] for s in SECTORS}


def evolve_with_first_order(pulse: PulseWaveform, channels, zeta: float = 0.0,
                            errors: Errors = NO_ERRORS, sectors=SECTORS) -> dict:
    """Zeroth- and first-order states, d psi1/dt = -i H0 psi1 - i H1 psi0.

    ``channels`` is either a list of channel kinds (each sector receives the
    ones acting on it) or a mapping sector -> list.  The |11> block uses the
    W basis.  For two-half pulses the detuning generators change sign in the
    second half.
    """
    if not isinstance(channels, dict):
        channels = default_channels(channels)
    out = {}
    for sector in sectors:
        chans = list(channels.get(sector, []))
        k = len(chans)
        z = _initial(sector, n_blocks=k + 1)
        mask = _phase_mask(sector, k + 1)
        uniq, idx = _unique_segments(pulse.amp_scale, pulse.dts)
        theta = np.ascontiguousarray(np.outer(pulse.phase, mask))
        for h in range(pulse.halves):
            signs = [(-1.0 if (h == 1 and ch in DETUNING_CHANNELS) else 1.0) for ch in chans]
            m0s = segment_propagators(sector, uniq, errors, 0.0, "w", zeta, chans, signs)
            z = _kernels.forward(m0s, idx, theta, z)[-1]
        d = sector.dim
        out[sector] = SectorState(sector, z[:d], {ch: z[(c + 1) * d:(c + 2) * d]
                                                  for c, ch in enumerate(chans)}, basis="w")
    return out


# --------------------------------------------------------------------------
# fidelities


def _overlaps(states: dict) -> dict:
    return {s: complex(states[s].psi0[0]) if isinstance(states[s], SectorState)
            else complex(np.asarray(states[s])[0]) for s in SECTORS}


def phases_extract(z: dict, target: GateTarget) -> dict:
    t10, t01 = np.angle(z[Sector.S10]), np.angle(z[Sector.S01])
    return {Sector.S10: t10, Sector.S01: t01, Sector.S11: t10 + t01 + target.conditional_phase}


def _bell_amplitude(z: dict, theta: dict) -> complex:
    return 1 + sum(np.exp(-1j * theta[s]) * z[s] for s in SECTORS)


def phases_optimal(z: dict, target: GateTarget) -> dict:
    """Single-qubit phases maximizing the Bell fidelity for given overlaps."""
    cp = target.conditional_phase

    def neg_f(x):
        th = {Sector.S10: x[0], Sector.S01: x[1], Sector.S11: x[0] + x[1] + cp}
        return -abs(_bell_amplitude(z, th)) ** 2

    grid = np.linspace(-np.pi, np.pi, 73)
    vals = [(neg_f((a, b)), a, b) for a in grid for b in grid]
    _, a0, b0 = min(vals)
    res = minimize(neg_f, [a0, b0], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
    a, b = res.x
    return {Sector.S10: a, Sector.S01: b, Sector.S11: a + b + cp}


def decay_probability(states: dict) -> float:
    lost = [1 - float(np.sum(np.abs(states[s].psi0) ** 2)) for s in SECTORS]
    return max(0.0, sum(lost) / 4)


def bell_fidelity(states: dict, target: GateTarget = GateTarget(), phase_policy="extract",
                  theta: dict | None = None) -> FidelityReport:
    """Bell-state fidelity from final sector states.

    ``phase_policy`` is ``"extract"`` (arg of the single-excitation overlaps,
    conditional phase from the target), ``"optimal"`` (maximized) or
    ``"frozen"`` (``theta`` supplied).  Decayed norm is not renormalized.
    """
    z = _overlaps(states)
    if phase_policy == "frozen":
        if theta is None:
            raise ValueError("frozen phase policy needs theta")
    elif phase_policy == "optimal":
        theta = phases_optimal(z, target)
    elif phase_policy == "extract":
        theta = phases_extract(z, target)
    else:
        raise ValueError(f"unknown phase policy {phase_policy!r}")
    amp = _bell_amplitude(z, theta)
    F = min(1.0, abs(amp) ** 2 / 16)
    norm = (1 + sum(abs(z[s]) ** 2 for s in SECTORS)) / 4
    Fc = min(1.0, abs(amp) ** 2 / 16 / norm) if norm > 0 else float("nan")
    return FidelityReport(F, Fc, {s.value: float(theta[s]) for s in SECTORS},
                          p_d=decay_probability(states) if all(
                              isinstance(states[s], SectorState) for s in SECTORS) else 0.0)


def conditional_fidelity(states: dict, target: GateTarget = GateTarget(), phase_policy="extract",
                         theta: dict | None = None) -> float:
    """Fidelity after projecting onto the computational subspace and renormalizing."""
    z = _overlaps(states)
    if sum(abs(z[s]) ** 2 for s in SECTORS) == 0 and phase_policy != "frozen":
        # |00> alone never defines a gate
        raise DegenerateInputError("no population left in the computational subspace")
    return bell_fidelity(states, target, phase_policy, theta).F_c


def theta_from_report(report: FidelityReport) -> dict:
    return {Sector(k): v for k, v in report.theta.items()}


# --------------------------------------------------------------------------
# Rydberg time


def _occupation_integrals(sector, uniq, gamma=0.0, basis="exact"):
    """Per segment type: int_0^dt M0(u)^H Q M0(u) du with Q the Rydberg projector."""
    out = []
    Q = np.diag(rydberg_mask(sector)).astype(complex)
    d = Q.shape[0]
    for a, dt in uniq:
        A = -1j * build_sector(sector, a, NO_ERRORS, gamma, basis)
        C = np.zeros((2 * d, 2 * d), dtype=complex)
        C[:d, :d] = -A.conj().T
        C[:d, d:] = Q
        C[d:, d:] = A
        E = expm(C * dt)
        out.append(E[d:, d:].conj().T @ E[:d, d:])
    return np.array(out)


def rydberg_time(pulse: PulseWaveform, method: str = "exact") -> dict:
    """Time spent outside the computational state per sector, and the 4-state average.

    ``method="exact"`` integrates every segment analytically;
    ``"trapezoid"`` uses the trapezoid rule on segment boundaries.
    """
    taus = {}
    for sector in SECTORS:
        uniq, idx = _unique_segments(pulse.amp_scale, pulse.dts)
        theta = np.ascontiguousarray(np.outer(pulse.phase, _phase_mask(sector)))
        m0s = segment_propagators(sector, uniq, NO_ERRORS, 0.0, "exact")
        states = _kernels.forward(m0s, idx, theta, _initial(sector))
        if method == "exact":
            K = _occupation_integrals(sector, uniq)
            w = np.exp(1j * theta) * states[:-1]
            tau = float(np.real(np.einsum("sa,sab,sb->", w.conj(), K[idx], w)))
        elif method == "trapezoid":
            pop = 1 - np.abs(states[:, 0]) ** 2
            tau = float(np.sum(0.5 * (pop[1:] + pop[:-1]) * pulse.dts))
        else:
            raise ValueError(f"unknown method {method!r}")
        taus[sector.value] = pulse.halves * tau
    taus["avg"] = (taus["10"] + taus["01"] + taus["11"]) / 4
    return taus


def rydberg_population_history(pulse: PulseWaveform):
    """4-state-averaged Rydberg population on the segment grid (including halves)."""
    reps = pulse.halves
    amps = np.tile(pulse.amp_scale, reps)
    dts = np.tile(pulse.dts, reps)
    phase = np.tile(pulse.phase, reps)
    t = np.concatenate([[0.0], np.cumsum(dts)])
    pops = np.zeros(len(t))
    uniq, idx = _unique_segments(amps, dts)
    for sector in SECTORS:
        theta = np.ascontiguousarray(np.outer(phase, _phase_mask(sector)))
        m0s = segment_propagators(sector, uniq, NO_ERRORS, 0.0, "exact")
        states = _kernels.forward(m0s, idx, theta, _initial(sector))
        pops += (1 - np.abs(states[:, 0]) ** 2) / 4
    return t, pops


def evolve_batch(pulse: PulseWaveform, eps: np.ndarray, delta: np.ndarray, gamma: float,
                 zeta: float = 0.0, reverse_detuning: bool = True):
    """Final states for many static error tuples.

    ``eps`` and ``delta`` have shape (B, 2).  Returns dict sector -> (B, dim).
    """
    out = {}
    uniq, idx = _unique_segments(pulse.amp_scale, pulse.dts)
    for sector in SECTORS:
        theta = np.ascontiguousarray(np.outer(pulse.phase, _phase_mask(sector)))
        finals = []
        for e, dl in zip(eps, delta):
            z = _initial(sector)
            for h in range(pulse.halves):
                sgn = -1.0 if (h == 1 and reverse_detuning) else 1.0
                err = Errors(e[0], e[1], sgn * dl[0], sgn * dl[1])
                z = _kernels.forward(segment_propagators(sector, uniq, err, gamma, "exact", zeta),
                                     idx, theta, z)[-1]
            finals.append(z)
        out[sector] = np.array(finals)
    return out


def fidelity_from_finals(finals: dict, theta: dict, i: int | None = None):
    """(F, F_c, p_d) arrays from batched final states and frozen phases."""
    z = {s: finals[s][:, 0] for s in SECTORS}
    amp = 1 + sum(np.exp(-1j * theta[s]) * z[s] for s in SECTORS)
    F = np.abs(amp) ** 2 / 16
    norm = (1 + sum(np.abs(z[s]) ** 2 for s in SECTORS)) / 4
    Fc = F / norm
    p_d = sum(1 - np.sum(np.abs(finals[s]) ** 2, axis=1) for s in SECTORS) / 4
    return np.minimum(F, 1.0), np.minimum(Fc, 1.0), np.maximum(p_d, 0.0)


def sector_states_from_vectors(vectors: dict) -> dict:
    return {s: SectorState(s, np.asarray(v)) for s, v in vectors.items()}


def ideal_phases(pulse: PulseWaveform, target: GateTarget) -> dict:
    """Zero-noise single-qubit phases of a pulse (used as frozen calibration)."""
    rep = bell_fidelity(evolve_exact(pulse), target, "extract")
    return theta_from_report(rep)


def first_order_overlap_sum(states: dict, sector: Sector) -> complex:
    """Sum over detuning channels of <q|psi1>."""
    st = states[sector]
    return sum(complex(st.psi1[ch][0]) for ch in DETUNING_CHANNELS if ch in st.psi1)


def detuning_overlap_residual(pulse: PulseWaveform) -> dict:
    """|sum_j <q|psi1_j> + i exp(i theta_q) tau_q| per sector (zero for perfect gates)."""
    states = evolve_with_first_order(pulse, list(DETUNING_CHANNELS))
    taus = rydberg_time(PulseWaveform(pulse.n_segments, pulse.duration, pulse.phase,
                                      pulse.amp_scale, segment_durations=pulse.segment_durations))
    out = {}
    for s in SECTORS:
        theta_q = np.angle(states[s].psi0[0])
        lhs = first_order_overlap_sum(states, s)
        out[s.value] = abs(lhs + 1j * np.exp(1j * theta_q) * taus[s.value])
    return out


__all__ = [
    "SectorState", "FidelityReport", "DegenerateInputError", "evolve_exact",
    "evolve_with_first_order", "bell_fidelity", "conditional_fidelity", "rydberg_time",
    "rydberg_population_history", "evolve_batch", "fidelity_from_finals", "ideal_phases",
    "detuning_overlap_residual", "SECTORS", "DOPPLER_STEP",
]
