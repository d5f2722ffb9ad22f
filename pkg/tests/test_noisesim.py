import math

import numpy as np
import pytest

from rydgate.model import Errors, GateTarget, PhysicalParams
from rydgate.noisesim import (CSV_COLUMNS, NoiseModel, Sampler, crossover, erasure_channel,
                              simulate_gate, sweep)
from rydgate.propagate import bell_fidelity, evolve_exact, ideal_phases, rydberg_time
from rydgate.trap import ReversalMethod, TrapConfig, ensemble_motion, thermal_std

P = PhysicalParams()


def test_noiseless_gate_is_perfect(to_pulse):
    b = simulate_gate(to_pulse, NoiseModel(decay=False))
    assert 1 - b.F < 1e-10 and 1 - b.Fc < 1e-10 and b.p_d < 1e-12


def test_decay_only_budget(to_pulse):
    b = simulate_gate(to_pulse, NoiseModel())
    g = P.gamma_dimless
    assert 1 - b.F == pytest.approx(g * rydberg_time(to_pulse)["avg"], rel=2e-3)
    assert b.eta_e == pytest.approx(50, rel=0.01)


def test_erasure_channel_limits():
    s = erasure_channel(0.99, 1.0, 0.01, 0.98)
    assert s.p_e == pytest.approx(0.0098) and s.p_p == pytest.approx(0.0002)
    z = erasure_channel(1.0, 1.0, 0.0, 0.98)
    assert z.p_e == 0 and z.p_p == 0 and math.isinf(z.eta_e)


def test_static_eps_quadrature_matches_direct_average(to_pulse):
    sig = 0.02
    b = simulate_gate(to_pulse, NoiseModel(sigma_eps=sig, decay=False, stark=False))
    theta = ideal_phases(to_pulse, GateTarget())
    x, w = np.polynomial.hermite_e.hermegauss(40)
    w = w / w.sum()
    ref = sum(wi * bell_fidelity(evolve_exact(to_pulse, Errors(sig * xi, sig * xi)),
                                 phase_policy="frozen", theta=theta).F for xi, wi in zip(x, w))
    assert b.F == pytest.approx(ref, abs=1e-10)


def _phase_route(pulse, noise, n_use):
    """Average F through the laser-phase route with independently integrated motion."""
    trap = noise.resolved_trap()
    om = trap.small_amplitude_frequency
    sx, sv = thermal_std(noise.temperature, P.mass, om)
    pts = np.random.default_rng(noise.seed).standard_normal((noise.shots, 4))
    x0, v0 = sx * pts[:, :2], sv * pts[:, 2:]
    from rydgate.noisesim import _gate_layout
    sched = _gate_layout(pulse, noise, trap)
    theta = ideal_phases(pulse, GateTarget())
    tau = pulse.duration
    Fs = []
    for i in range(n_use):
        def doppler(t):
            t = np.asarray(t)
            half = (t >= tau).astype(int) if pulse.halves == 2 else np.zeros(len(t), int)
            ts = np.array(sched.starts)[half] + (t - half * tau) / P.omega_max
            sgn = np.array(sched.k_signs, float)[half]
            order = np.argsort(ts)
            out = []
            for a in range(2):
                x, _ = ensemble_motion(trap, [x0[i, a]], [v0[i, a]], ts[order],
                                       t0=sched.starts[0])
                xa = np.empty(len(ts))
                xa[order] = x[0]
                out.append(sgn * P.wavevector * xa)
            return out
        st = evolve_exact(pulse, doppler=doppler)
        Fs.append(bell_fidelity(st, phase_policy="frozen", theta=theta).F)
    return np.array(Fs)


def test_doppler_dual_route_single_half(to_pulse):
    noise = NoiseModel(temperature=20e-6, sampler=Sampler.MONTE_CARLO, shots=100, seed=4,
                       decay=False, modulation=False)
    b = simulate_gate(to_pulse, noise)
    F_ref = _phase_route(to_pulse, noise, 100).mean()
    assert 1 - b.F == pytest.approx(1 - F_ref, rel=1e-3)


@pytest.mark.parametrize("method", [ReversalMethod.WAIT, ReversalMethod.SWITCH])
def test_doppler_dual_route_two_halves(dr_pulse, method):
    noise = NoiseModel(temperature=40e-6, sampler=Sampler.MONTE_CARLO, shots=100, seed=5,
                       decay=False, reversal=method)
    b = simulate_gate(dr_pulse, noise)
    F_ref = _phase_route(dr_pulse, noise, 100).mean()
    assert 1 - b.F == pytest.approx(1 - F_ref, rel=1e-3, abs=1e-9)


def test_dr_suppresses_doppler(to_pulse, dr_pulse):
    n = NoiseModel(temperature=30e-6, decay=False, sampler=Sampler.MONTE_CARLO, shots=300)
    assert 1 - simulate_gate(dr_pulse, n).F < 0.1 * (1 - simulate_gate(to_pulse, n).F)


def test_two_half_pulse_needs_reversal(dr_pulse):
    with pytest.raises(ValueError):
        simulate_gate(dr_pulse, NoiseModel(reversal=ReversalMethod.NONE))


def test_invalid_noise_model():
    with pytest.raises(ValueError):
        NoiseModel(sigma_eps=-0.1)
    with pytest.raises(ValueError):
        NoiseModel(sampler=Sampler.MONTE_CARLO, shots=10)


def test_monte_carlo_seed_determinism(to_pulse):
    n = NoiseModel(temperature=10e-6, sampler=Sampler.MONTE_CARLO, shots=200, seed=9)
    assert simulate_gate(to_pulse, n).F == simulate_gate(to_pulse, n).F


def test_sweep_and_csv(tmp_path, to_pulse, ar_pulse):
    res = sweep({"TO": to_pulse, "AR": ar_pulse}, [0.0, 0.03], [0.0], NoiseModel(stark=False))
    assert res.argmin[0, 0] == "TO" and res.argmin[1, 0] == "AR"
    path = tmp_path / "s.csv"
    res.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == CSV_COLUMNS and len(lines) == 5
    with pytest.raises(ValueError):
        sweep({"TO": to_pulse}, [], [0.0])


def test_crossover_of_lines():
    x = np.linspace(0.0, 1.0, 11)
    c = crossover(x, 1 + x, 1.5 + 0 * x, n_boot=20, log_x=False)
    assert c.found and c.value == pytest.approx(0.5, abs=1e-6)
    assert not crossover(x, 1 + 0 * x, 2 + 0 * x, n_boot=5, log_x=False).found
