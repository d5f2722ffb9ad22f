"""Shipped pulse library (JSON files under ``data/pulses``)."""
from __future__ import annotations

import json
from importlib import resources

from .model import PulseWaveform

FILES = {
    "TO": "to.json",
    "AR": "ar.json",
    "DR": "dr.json",
    "ADR": "adr.json",
    "CADR": "cadr.json",
    "SSR1_0.1": "ssr1_z0.1.json",
    "SSR1_1": "ssr1_z1.json",
    "SSR2_0.1": "ssr2_z0.1.json",
    "SSR_ADR_0.1": "ssr_adr_z0.1.json",
    "SSR_CADR_0.1": "ssr_cadr_z0.1.json",
    "DETOPT": "detopt.json",
}


def _dir():
    return resources.files("rydgate") / "data" / "pulses"


def available() -> list:
    return [k for k, f in FILES.items() if (_dir() / f).is_file()]


def load_pulse(name: str) -> PulseWaveform:
    """Shipped pulse by family name (``"SSR1_0.1"`` etc. for Stark variants)."""
    if name not in FILES:
        raise KeyError(f"no shipped pulse named {name!r}; known: {sorted(FILES)}")
    return PulseWaveform.from_dict(json.loads((_dir() / FILES[name]).read_text()))


def noise_pulse_set(zeta: float = 0.1, names=("TO", "AR", "DR", "ADR")) -> dict:
    """Pulses compared under realistic noise.

    With a light shift (``zeta != 0``) the amplitude-robust families are
    replaced by their Stark-robust variants.
    """
    out = {}
    for n in names:
        key = n
        if zeta and n in ("AR", "ADR", "CADR"):
            key = {"AR": "SSR1", "ADR": "SSR_ADR", "CADR": "SSR_CADR"}[n] + f"_{zeta:g}"
        out[n] = load_pulse(key)
    return out
