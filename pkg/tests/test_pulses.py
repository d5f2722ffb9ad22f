"""Properties of the shipped pulse library."""
import numpy as np
import pytest

from rydgate.model import ChannelKind, Errors, GateTarget, Sector
from rydgate.optimize import (build_composite_detuning_pulse, cost_and_gradient,
                              detuning_second_order, make_spec)
from rydgate.propagate import (bell_fidelity, evolve_exact, evolve_with_first_order,
                               ideal_phases, rydberg_population_history)
from rydgate.pulses import FILES, available, load_pulse, noise_pulse_set

FAMILY = {"TO": ("TO", 0.0), "AR": ("AR", 0.0), "DR": ("DR", 0.0), "ADR": ("ADR", 0.0),
          "CADR": ("CADR", 0.0), "SSR1_0.1": ("SSR1", 0.1), "SSR1_1": ("SSR1", 1.0),
          "SSR2_0.1": ("SSR2", 0.1), "SSR_ADR_0.1": ("SSR_ADR", 0.1),
          "SSR_CADR_0.1": ("SSR_CADR", 0.1)}


def test_library_is_complete():
    assert sorted(available()) == sorted(FILES)


@pytest.mark.parametrize("name", sorted(FAMILY))
def test_shipped_pulse_solves_its_spec(name):
    fam, zeta = FAMILY[name]
    spec = make_spec(fam, zeta)
    p = load_pulse(name)
    assert p.halves == spec.halves
    J, _ = cost_and_gradient(p, spec)
    assert J < 1e-7
    assert 1 - bell_fidelity(evolve_exact(p), phase_policy="optimal").F < 1e-7


@pytest.mark.parametrize("name", ["DR", "ADR", "CADR", "SSR_ADR_0.1", "SSR_CADR_0.1"])
def test_rydberg_population_vanishes_between_halves(name):
    p = load_pulse(name)
    _, pop = rydberg_population_history(p)
    assert abs(pop[p.n_segments]) < 1e-8


def test_adr_is_robust_to_antisymmetric_light_shift():
    # not penalized for ADR; follows from its Doppler robustness
    def norm(name):
        st = evolve_with_first_order(load_pulse(name), [ChannelKind.STARK_MINUS], zeta=1.0,
                                     sectors=[Sector.S11])
        return np.linalg.norm(st[Sector.S11].psi1[ChannelKind.STARK_MINUS])
    assert norm("ADR") < 1e-3
    assert norm("AR") > 1.0


@pytest.mark.parametrize("name, lo, hi", [("TO", 1.9, 2.1), ("AR", 3.0, np.inf)])
def test_amplitude_error_scaling(name, lo, hi):
    p = load_pulse(name)
    theta = ideal_phases(p, GateTarget())
    eps = np.array([0.01, 0.02, 0.03, 0.05])
    inf = [1 - bell_fidelity(evolve_exact(p, Errors(e, e)), phase_policy="frozen", theta=theta).F
           for e in eps]
    slope = np.polyfit(np.log(eps), np.log(inf), 1)[0]
    assert lo <= slope <= hi


def test_detuning_optimal_pulse():
    star = load_pulse("DETOPT")
    assert abs(star.duration / 7.70 - 1) < 0.02
    assert abs(detuning_second_order(star)[1] / 2.87 - 1) < 0.02
    assert 1 - bell_fidelity(evolve_exact(star)).F < 1e-12


def test_composite_pulse_keeps_the_gate():
    star = load_pulse("DETOPT")
    comp = build_composite_detuning_pulse(star, 0.02)
    assert 1 - bell_fidelity(evolve_exact(comp)).F < 1e-6
    a = ideal_phases(star, GateTarget())
    b = ideal_phases(comp, GateTarget())
    for s in (Sector.S10, Sector.S11):
        assert abs(np.exp(1j * a[s]) - np.exp(1j * b[s])) < 1e-6


def test_ssr1_reduces_to_ar_without_light_shift():
    p = load_pulse("AR")
    ja = cost_and_gradient(p, make_spec("AR"))[0]
    js = cost_and_gradient(p, make_spec("SSR1", 0.0))[0]
    assert js == pytest.approx(ja, rel=1e-10, abs=1e-15)


def test_noise_set_substitutes_light_shift_variants():
    s = noise_pulse_set(0.1, names=("TO", "AR", "ADR", "CADR"))
    assert s["AR"].duration == load_pulse("SSR1_0.1").duration
    assert s["ADR"].duration == load_pulse("SSR_ADR_0.1").duration
    assert noise_pulse_set(0.0, names=("AR",))["AR"].duration == load_pulse("AR").duration
