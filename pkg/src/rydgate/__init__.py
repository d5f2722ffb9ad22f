"""Robust phase-modulated blockade CZ gates: pulse synthesis and error analysis."""
from .model import (ChannelKind, ErrorChannel, Errors, GateKind, GateTarget, Mode,
                    PhysicalParams, PulseWaveform, Sector, build_sector)
from .propagate import (bell_fidelity, conditional_fidelity, evolve_exact,
                        evolve_with_first_order, rydberg_time)

__version__ = "0.1.0"
