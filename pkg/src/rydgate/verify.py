"""Self-checks behind ``rydgate verify``.

Each suite returns ``(name, ok, detail)`` rows.  The checks are cheap
(seconds) and independent of the acceptance tests.
"""
from __future__ import annotations

import numpy as np

SUITES = ["gradients", "overlap", "mathieu", "decoder", "norm"]


def _gradients():
    from .model import PulseWaveform
    from .optimize import cost_and_gradient, make_spec
    rows = []
    rng = np.random.default_rng(1)
    n, tau, h = 24, 8.0, 1e-6
    for name in ("TO", "AR", "SSR2", "DR", "CADR", "DETOPT"):
        spec = make_spec(name, 0.1 if name.startswith("SSR") else 0.0)
        pulse = PulseWaveform(n, tau, rng.uniform(-np.pi, np.pi, n), np.ones(n),
                              halves=spec.halves)
        _, g = cost_and_gradient(pulse, spec)
        idx = rng.choice(n, 4, replace=False)
        fd = []
        for j in idx:
            e = np.zeros(n)
            e[j] = h
            jp, jm = (cost_and_gradient(PulseWaveform(n, tau, pulse.phase + s * e, pulse.amp_scale,
                                                      halves=spec.halves), spec)[0]
                      for s in (1, -1))
            fd.append((jp - jm) / (2 * h))
        fd = np.array(fd)
        err = np.max(np.abs(fd - g[idx])) / max(np.max(np.abs(fd)), 1e-12)
        rows.append((f"gradient {name}", err < 1e-5, f"rel err {err:.2e}"))
    return rows


def _overlap(pulse=None):
    from .propagate import detuning_overlap_residual
    from .pulses import load_pulse
    pulse = pulse or load_pulse("TO")
    res = detuning_overlap_residual(pulse)
    worst = max(res.values())
    return [("detuning overlap identity", worst < 1e-3, f"max residual {worst:.2e}")]


def _mathieu():
    from .trap import find_modulation_frequency, mathieu_exponent, modulation_ratio
    rows = []
    r = modulation_ratio(2)
    rows.append(("modulation ratio dn=2", abs(r - 4.0791) < 1e-3, f"{r:.6f}"))
    nu, om = find_modulation_frequency(1.0, 2.0, 2)
    rows.append(("nu = 4 omega_tr", abs(nu - 4 * om) < 1e-8 * nu, f"{nu:.6f} vs {4 * om:.6f}"))
    M = mathieu_exponent(1.0, 2.0, 3.0).monodromy
    d = np.linalg.det(M)
    rows.append(("monodromy is symplectic", abs(d - 1) < 1e-9, f"det {d:.12f}"))
    hf = mathieu_exponent(1.0, 2.0, 200.0).omega_tr
    rows.append(("fast-modulation limit", abs(hf - 1) < 1e-3, f"omega_tr {hf:.6f}"))
    return rows


def _decoder():
    from .logical import build_code, decode_shot, sample_and_decode
    rows = []
    for d in (3, 5):
        c = build_code(d)
        comm = np.all((c.css_x_checks @ c.css_z_checks.T) % 2 == 0)
        rows.append((f"d={d} checks commute", bool(comm), ""))
        n = c.n
        ok = True
        for q in range(n):
            for ex, ez in ((1, 0), (0, 1), (1, 1)):
                x = np.zeros(n, np.uint8)
                z = np.zeros(n, np.uint8)
                x[q], z[q] = ex, ez
                er = np.zeros(n, bool)
                ok &= not decode_shot(c, x, z, er, 0.01).failed
                er[q] = True
                ok &= not decode_shot(c, x, z, er, 0.01).failed
        rows.append((f"d={d} single faults corrected", bool(ok), ""))
    est = sample_and_decode(build_code(5), 0.3, 0.0, 2000, seed=3)
    rows.append(("erasure-only decoding is consistent", est.residual_syndromes == 0,
                 f"p_L {est.p_L:.3f}"))
    return rows


def _norm():
    from .model import Errors, GateTarget, PhysicalParams
    from .noisesim import NoiseModel, simulate_gate
    from .propagate import bell_fidelity, evolve_exact, ideal_phases, rydberg_time
    from .pulses import load_pulse
    rows = []
    p = load_pulse("TO")
    st = evolve_exact(p, Errors(0.01, -0.02, 0.03, 0.01))
    nrm = max(abs(np.linalg.norm(s.psi0) - 1) for s in st.values())
    rows.append(("unitary evolution keeps norm", nrm < 1e-12, f"{nrm:.1e}"))
    g = PhysicalParams().gamma_dimless
    theta = ideal_phases(p, GateTarget())
    F = bell_fidelity(evolve_exact(p, gamma=g), phase_policy="frozen", theta=theta).F
    tr = rydberg_time(p)["avg"]
    rows.append(("decay loss matches gamma tau_R", abs((1 - F) / (g * tr) - 1) < 0.01,
                 f"{(1 - F):.4e} vs {g * tr:.4e}"))
    b = simulate_gate(p, NoiseModel(stark=False))
    rows.append(("noise simulator agrees with propagator", abs(b.F - F) < 1e-9,
                 f"{b.F:.12f} vs {F:.12f}"))
    return rows


def run(suite: str, pulse=None):
    table = {"gradients": _gradients, "overlap": lambda: _overlap(pulse), "mathieu": _mathieu,
             "decoder": _decoder, "norm": _norm}
    return table[suite]()
