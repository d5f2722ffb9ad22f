import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from rydgate.trap import (NoSolutionError, ReversalMethod, TrapConfig, TrapKind,
                          ensemble_motion, find_modulation_frequency, mathieu_exponent,
                          modulation_ratio, pulse_window_schedule, simulate_trajectory,
                          thermal_std)

M = 171 * 1.66053906660e-27


def test_modulation_ratio_dn2():
    assert modulation_ratio(2) == pytest.approx(4.079, rel=1e-3)


def test_dn1_has_no_solution():
    with pytest.raises(NoSolutionError):
        modulation_ratio(1)


def test_invalid_dn():
    with pytest.raises(ValueError):
        modulation_ratio(0)


def test_high_frequency_limit():
    assert mathieu_exponent(1.0, 2.0, 500.0).omega_tr == pytest.approx(1.0, rel=1e-3)


def test_floquet_frequency_by_direct_integration():
    # the Floquet multiplier of an independently integrated solution
    V0, m, nu = 1.0, 2.0, 3.0
    res = mathieu_exponent(V0, m, nu)
    T = 2 * np.pi / nu

    def rhs(t, y):
        w = (2 * V0 / m) * (1 - np.cos(nu * t))
        return [y[1], -w * y[0]]
    cols = [solve_ivp(rhs, (0, T), y0, method="Radau", rtol=1e-11, atol=1e-13).y[:, -1]
            for y0 in ([1, 0], [0, 1])]
    tr = cols[0][0] + cols[1][1]
    assert math.cos(res.omega_tr * T) == pytest.approx(tr / 2, abs=1e-8)


def test_find_modulation_frequency_units():
    V0 = 0.5 * M * (2 * np.pi * 40e3) ** 2
    nu, om = find_modulation_frequency(V0, M, 2)
    assert nu / math.sqrt(2 * V0 / M) == pytest.approx(4.0791, rel=1e-4)
    assert nu == pytest.approx(4 * om, rel=1e-9)


def test_modulated_for_reproduces_target():
    trap = TrapConfig.modulated_for(2 * np.pi * 50e3, M)
    assert mathieu_exponent(trap.V0, M, trap.nu).omega_tr == pytest.approx(2 * np.pi * 50e3,
                                                                         rel=1e-8)


def test_trap_validation():
    with pytest.raises(ValueError):
        TrapConfig(TrapKind.HARMONIC, omega=-1.0)
    with pytest.raises(ValueError):
        TrapConfig.harmonic(1.0, sigma_omega=-0.1)


def test_harmonic_energy_conserved():
    trap = TrapConfig.harmonic(2 * np.pi * 50e3, mass=M)
    tr = simulate_trajectory(trap, 1e-7, 0.01, (0, 1e-4), t_eval=np.linspace(0, 1e-4, 50))
    e = tr.energy(trap)
    assert np.ptp(e) / e[0] < 1e-9


def test_ensemble_matches_single_trajectory():
    trap = TrapConfig.modulated_for(2 * np.pi * 50e3, M)
    t = np.linspace(0, 2e-5, 40)
    x, v = ensemble_motion(trap, [3e-8], [0.02], t)
    tr = simulate_trajectory(trap, 3e-8, 0.02, (0, t[-1]), t_eval=t)
    np.testing.assert_allclose(x[0], tr.x, atol=1e-12)


def test_gaussian_trap_small_amplitude_is_harmonic():
    U0, w0 = 1e-27, 1e-6
    trap = TrapConfig.gaussian(U0, w0, mass=M)
    h = TrapConfig.harmonic(trap.small_amplitude_frequency, mass=M)
    t = np.linspace(0, 3e-5, 30)
    xg, _ = ensemble_motion(trap, [1e-10], [0.0], t)
    xh, _ = ensemble_motion(h, [1e-10], [0.0], t)
    np.testing.assert_allclose(xg, xh, atol=1e-14)


def test_thermal_std():
    sx, sv = thermal_std(20e-6, M, 2 * np.pi * 50e3)
    assert sv == pytest.approx(math.sqrt(1.380649e-23 * 20e-6 / M))
    assert sx == pytest.approx(sv / (2 * np.pi * 50e3))


def test_wait_schedule_reverses_velocity():
    trap = TrapConfig.harmonic(2 * np.pi * 50e3, mass=M)
    s = pulse_window_schedule(trap, ReversalMethod.WAIT, 1e-7)
    assert s.starts[1] == pytest.approx(np.pi / trap.omega)
    x, v = ensemble_motion(trap, [0.0], [1.0], np.array(s.centers))
    assert v[0, 1] == pytest.approx(-v[0, 0], rel=1e-6)


def test_switch_flips_k():
    trap = TrapConfig.modulated_for(2 * np.pi * 50e3, M)
    s = pulse_window_schedule(trap, ReversalMethod.SWITCH, 1e-7)
    assert s.k_signs == (1, -1)


def test_wait_without_trap_rejected():
    with pytest.raises(ValueError):
        pulse_window_schedule(TrapConfig(), ReversalMethod.WAIT, 1e-7)
