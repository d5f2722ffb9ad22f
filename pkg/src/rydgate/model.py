"""Domain types and sector Hamiltonians for a globally driven two-atom blockade gate.

Units are dimensionless throughout: rates in units of the maximal Rabi
frequency ``omega_max`` and times in units of ``1/omega_max``.  The blockade
shift is taken as infinite, so the doubly excited state never appears.

Basis ordering per sector::

    S10: (|10>, |r0>)
    S01: (|01>, |0r>)
    S11, exact basis: (|11>, |r1>, |1r>)
    S11, W basis:     (|11>, |W+>, |W->)
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Documented only; the blockade is treated as infinite everywhere.
BLOCKADE_NOTE = "perfect blockade (B -> infinity): |rr> is never populated"

ATOMIC_MASS_UNIT = 1.66053906660e-27
BOLTZMANN = 1.380649e-23


class Sector(enum.Enum):
    S10 = "10"
    S01 = "01"
    S11 = "11"

    @property
    def dim(self) -> int:
        return 3 if self is Sector.S11 else 2


class GateKind(enum.Enum):
    CZ = "CZ"
    CRZ_HALF_PI = "CRZ_HALF_PI"


@dataclass(frozen=True)
class GateTarget:
    """Required conditional phase ``theta11 - theta10 - theta01``."""

    kind: GateKind = GateKind.CZ
    winding: int = 0

    @property
    def conditional_phase(self) -> float:
        if self.kind is GateKind.CZ:
            return (2 * self.winding + 1) * math.pi
        return (2 * self.winding + 0.5) * math.pi


class ChannelKind(enum.Enum):
    AMP_1 = "AMP_1"
    AMP_2 = "AMP_2"
    AMP_PLUS = "AMP_PLUS"
    DET_1 = "DET_1"
    DET_2 = "DET_2"
    STARK_PLUS = "STARK_PLUS"
    STARK_MINUS = "STARK_MINUS"


class Mode(enum.Enum):
    FULL = "FULL"                # |psi1|^2
    LEAKAGE = "LEAKAGE"          # |(I - |q><q|) psi1|^2, two-half detuning cost
    CONDITIONAL = "CONDITIONAL"  # |<q|psi1>|^2


@dataclass(frozen=True)
class ErrorChannel:
    kind: ChannelKind
    mode: Mode = Mode.FULL


@dataclass(frozen=True)
class Errors:
    """Static imperfections: relative amplitude errors and detunings per atom."""

    eps1: float = 0.0
    eps2: float = 0.0
    delta1: float = 0.0
    delta2: float = 0.0

    def swapped(self) -> "Errors":
        return Errors(self.eps2, self.eps1, self.delta2, self.delta1)


NO_ERRORS = Errors()


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory parameters in SI units (angular frequencies in rad/s)."""

    omega_max: float = 2 * math.pi * 5.5e6
    wavevector: float = 2 * math.pi / 302e-9
    gamma: float = 1 / 100e-6
    trap_freq: float = 2 * math.pi * 50e3
    mass: float = 171 * ATOMIC_MASS_UNIT
    zeta: float = 0.1
    erasure_fraction: float = 0.98
    blockade: str = BLOCKADE_NOTE

    def __post_init__(self):
        for name in ("omega_max", "wavevector", "gamma", "trap_freq", "mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.erasure_fraction <= 1.0:
            raise ValueError("erasure_fraction must lie in [0, 1]")

    @property
    def gamma_dimless(self) -> float:
        return self.gamma / self.omega_max

    def to_dimless_time(self, t_seconds):
        return np.asarray(t_seconds) * self.omega_max

    def to_seconds(self, t_dimless):
        return np.asarray(t_dimless) / self.omega_max

    def velocity_std(self, temperature: float) -> float:
        return math.sqrt(BOLTZMANN * temperature / self.mass)

    def position_std(self, temperature: float, trap_freq: float | None = None) -> float:
        w = self.trap_freq if trap_freq is None else trap_freq
        return math.sqrt(BOLTZMANN * temperature / self.mass) / w


# --------------------------------------------------------------------------
# pulses


@dataclass
class PulseWaveform:
    """Piecewise-constant drive ``amp_scale[j] * exp(1j * phase[j])``.

    ``halves == 2`` marks a waveform that is one half of a gate; the gate
    applies it twice with the Doppler shift reversed in between.
    ``segment_durations`` overrides the uniform grid (used by composite
    constructions with idle parts).
    """

    n_segments: int
    duration: float
    phase: np.ndarray
    amp_scale: np.ndarray
    label: str = ""
    halves: int = 1
    segment_durations: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phase = np.asarray(self.phase, dtype=float)
        self.amp_scale = np.asarray(self.amp_scale, dtype=float)
        if self.n_segments < 0 or self.phase.shape != (self.n_segments,) \
                or self.amp_scale.shape != (self.n_segments,):
            raise ValueError("phase and amp_scale must have length n_segments")
        if self.n_segments > 0 and not self.duration > 0:
            raise ValueError("duration must be positive")
        if np.any(self.amp_scale < 0) or np.any(self.amp_scale > 1 + 1e-12):
            raise ValueError("amp_scale must lie in [0, 1]")
        if self.halves not in (1, 2):
            raise ValueError("halves must be 1 or 2")
        if self.segment_durations is not None:
            self.segment_durations = np.asarray(self.segment_durations, dtype=float)
            if self.segment_durations.shape != (self.n_segments,):
                raise ValueError("segment_durations must have length n_segments")
            if np.any(self.segment_durations < 0):
                raise ValueError("segment durations must be non-negative")
            if not math.isclose(self.segment_durations.sum(), self.duration,
                                rel_tol=1e-9, abs_tol=1e-12):
                raise ValueError("segment_durations must sum to duration")

    @classmethod
    def from_phases(cls, phase, duration, label="", halves=1):
        phase = np.asarray(phase, dtype=float)
        return cls(len(phase), float(duration), phase, np.ones_like(phase), label, halves)

    @classmethod
    def empty(cls, label="identity"):
        return cls(0, 0.0, np.zeros(0), np.zeros(0), label)

    @property
    def dts(self) -> np.ndarray:
        if self.segment_durations is not None:
            return self.segment_durations
        if self.n_segments == 0:
            return np.zeros(0)
        return np.full(self.n_segments, self.duration / self.n_segments)

    @property
    def drive(self) -> np.ndarray:
        return self.amp_scale * np.exp(1j * self.phase)

    @property
    def gate_duration(self) -> float:
        return self.halves * self.duration

    def resampled(self, n_segments: int, duration: float | None = None) -> "PulseWaveform":
        """Phase profile stretched onto a new uniform grid (warm starts)."""
        if self.segment_durations is not None:
            raise ValueError("cannot resample a non-uniform pulse")
        duration = self.duration if duration is None else duration
        old = (np.arange(self.n_segments) + 0.5) / self.n_segments
        new = (np.arange(n_segments) + 0.5) / n_segments
        phase = np.interp(new, old, np.unwrap(self.phase))
        amp = np.interp(new, old, self.amp_scale)
        return PulseWaveform(n_segments, duration, phase, amp, self.label, self.halves)

    def to_dict(self) -> dict:
        d = {
            "n_segments": int(self.n_segments),
            "duration": float(self.duration),
            "phase": [float(p) for p in np.unwrap(self.phase)] if self.n_segments else [],
            "amp_scale": [float(a) for a in self.amp_scale],
            "label": self.label,
            "units": "omega_max",
        }
        if self.halves != 1:
            d["halves"] = self.halves
        if self.segment_durations is not None:
            d["segment_durations"] = [float(t) for t in self.segment_durations]
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PulseWaveform":
        for key in ("n_segments", "duration", "phase", "amp_scale"):
            if key not in d:
                raise ValueError(f"pulse JSON is missing field '{key}'")
        if d.get("units", "omega_max") != "omega_max":
            raise ValueError("field 'units' must be 'omega_max'")
        if not isinstance(d["n_segments"], int):
            raise ValueError("field 'n_segments' must be an integer")
        try:
            return cls(d["n_segments"], float(d["duration"]), d["phase"], d["amp_scale"],
                       d.get("label", ""), d.get("halves", 1), d.get("segment_durations"),
                       d.get("meta", {}))
        except ValueError as exc:
            raise ValueError(f"invalid pulse JSON: {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "PulseWaveform":
        return cls.from_dict(json.loads(Path(path).read_text()))


def concatenate(*pulses: PulseWaveform, label: str = "") -> PulseWaveform:
    """Join pulses into one non-uniform waveform."""
    phase = np.concatenate([p.phase for p in pulses])
    amp = np.concatenate([p.amp_scale for p in pulses])
    dts = np.concatenate([p.dts for p in pulses])
    return PulseWaveform(len(phase), float(dts.sum()), phase, amp, label,
                         segment_durations=dts)


# --------------------------------------------------------------------------
# Hamiltonians


def rydberg_mask(sector: Sector) -> np.ndarray:
    """1 on basis states carrying a Rydberg excitation."""
    return np.array([0.0, 1.0, 1.0]) if sector is Sector.S11 else np.array([0.0, 1.0])


def build_sector(sector: Sector, drive: complex, errors: Errors = NO_ERRORS,
                 gamma: float = 0.0, basis: str = "w", stark_zeta: float = 0.0) -> np.ndarray:
    """Sector Hamiltonian for one constant drive sample.

    ``basis`` selects the exact (``"exact"``) or first-order W form (``"w"``)
    of the |11> block; it is ignored for the single-excitation sectors.
    ``stark_zeta`` adds the amplitude-correlated light shift
    ``zeta * eps_i * |drive|^2`` to each atom's detuning.  Decay enters as
    ``-i gamma / 2`` on every Rydberg-carrying state.
    """
    if not isinstance(sector, Sector):
        raise ValueError(f"unknown sector {sector!r}")
    if abs(drive) > 1 + 1e-12:
        raise ValueError("drive magnitude must not exceed omega_max")
    om = complex(drive)
    a2 = abs(om) ** 2
    d1 = errors.delta1 + stark_zeta * errors.eps1 * a2
    d2 = errors.delta2 + stark_zeta * errors.eps2 * a2
    loss = -0.5j * gamma
    if sector is Sector.S10:
        c = (1 + errors.eps1) * om / 2
        return np.array([[0, c], [np.conj(c), d1 + loss]], dtype=complex)
    if sector is Sector.S01:
        c = (1 + errors.eps2) * om / 2
        return np.array([[0, c], [np.conj(c), d2 + loss]], dtype=complex)
    if basis == "exact":
        c1 = (1 + errors.eps1) * om / 2
        c2 = (1 + errors.eps2) * om / 2
        return np.array([[0, c1, c2],
                         [np.conj(c1), d1 + loss, 0],
                         [np.conj(c2), 0, d2 + loss]], dtype=complex)
    if basis != "w":
        raise ValueError(f"unknown basis {basis!r}")
    eps_p = 0.5 * (errors.eps1 + errors.eps2)
    dp, dm = 0.5 * (d1 + d2), 0.5 * (d1 - d2)
    c = math.sqrt(2) * (1 + eps_p) * om / 2
    return np.array([[0, c, 0],
                     [np.conj(c), dp + loss, dm],
                     [0, dm, dp + loss]], dtype=complex)


_APPLICABLE = {
    Sector.S10: {ChannelKind.AMP_1, ChannelKind.DET_1, ChannelKind.STARK_PLUS},
    Sector.S01: {ChannelKind.AMP_2, ChannelKind.DET_2, ChannelKind.STARK_PLUS},
    Sector.S11: {ChannelKind.AMP_1, ChannelKind.AMP_2, ChannelKind.AMP_PLUS, ChannelKind.DET_1,
                 ChannelKind.DET_2, ChannelKind.STARK_PLUS, ChannelKind.STARK_MINUS},
}


def perturbation_generator(sector: Sector, channel: ChannelKind, zeta: float = 0.0,
                           drive: complex = 1.0) -> np.ndarray:
    """First-order generator dH/d(error) in the optimization (W) basis.

    Amplitude channels are drive-proportional couplings, detuning channels
    Rydberg projectors.  ``STARK_PLUS`` is the amplitude generator plus
    ``zeta |drive|^2`` times the Rydberg projector; ``STARK_MINUS`` is the
    antisymmetric light-shift term ``zeta (|W+><W-| + h.c.)`` of the |11> block.
    """
    if isinstance(channel, ErrorChannel):
        channel = channel.kind
    if channel not in _APPLICABLE.get(sector, ()):
        raise ValueError(f"channel {channel.value} does not act on sector {sector}")
    om = complex(drive)
    a2 = abs(om) ** 2
    if sector is not Sector.S11:
        coupling = np.array([[0, om / 2], [np.conj(om) / 2, 0]], dtype=complex)
        proj = np.diag([0.0, 1.0]).astype(complex)
        if channel in (ChannelKind.AMP_1, ChannelKind.AMP_2):
            return coupling
        if channel in (ChannelKind.DET_1, ChannelKind.DET_2):
            return proj
        return coupling + zeta * a2 * proj
    s = math.sqrt(2) / 2
    coupling = np.array([[0, s * om, 0], [s * np.conj(om), 0, 0], [0, 0, 0]], dtype=complex)
    proj = np.diag([0.0, 1.0, 1.0]).astype(complex)
    cross = np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=complex)
    if channel is ChannelKind.AMP_PLUS:
        return coupling
    if channel in (ChannelKind.AMP_1, ChannelKind.AMP_2):
        return 0.5 * coupling
    if channel is ChannelKind.DET_1:
        return 0.5 * (proj + cross)
    if channel is ChannelKind.DET_2:
        return 0.5 * (proj - cross)
    if channel is ChannelKind.STARK_PLUS:
        return coupling + zeta * a2 * proj
    return zeta * a2 * cross


def exact_to_w(errors: Errors = NO_ERRORS) -> np.ndarray:
    """Unitary taking exact-basis |11>-sector amplitudes to the W basis (first order)."""
    a, b = 1 + errors.eps1, 1 + errors.eps2
    beta = math.hypot(a, b)
    return np.array([[1, 0, 0], [0, a / beta, b / beta], [0, b / beta, -a / beta]], dtype=complex)
