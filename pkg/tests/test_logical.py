import itertools

import numpy as np
import pytest

from rydgate.logical import (build_code, decode_shot, logical_rate, sample_and_decode,
                             stratified_estimate)
from rydgate.noisesim import GateErrorBudget


def _single(code, q, kind, erased=False):
    ex = np.zeros(code.n, np.uint8)
    ez = np.zeros(code.n, np.uint8)
    ex[q] = kind in (1, 2)
    ez[q] = kind in (2, 3)
    er = np.zeros(code.n, bool)
    er[q] = erased
    return ex, ez, er


@pytest.mark.parametrize("d", [3, 5, 7])
def test_code_structure(d):
    c = build_code(d)
    assert c.stab_x.shape == (d * d - 1, d * d)
    # symplectic commutation of all stabilizers and logicals
    S = np.hstack([c.stab_x, c.stab_z]).astype(int)
    L = np.array([np.concatenate(c.logical_x), np.concatenate(c.logical_z)], int)
    J = lambda a, b: (a[:, :d * d] @ b[:, d * d:].T + a[:, d * d:] @ b[:, :d * d].T) % 2  # noqa
    assert not J(S, S).any()
    assert not J(S, L).any()
    assert J(L, L)[0, 1] == 1
    # bulk plaquettes carry two X and two Z factors
    w4 = (c.stab_x | c.stab_z).sum(1) == 4
    assert np.all(c.stab_x[w4].sum(1) == 2) and np.all(c.stab_z[w4].sum(1) == 2)


def test_even_distance_rejected():
    with pytest.raises(ValueError):
        build_code(4)


def test_d3_distance_by_enumeration():
    c = build_code(3)
    n = c.n
    kinds = np.array(list(itertools.product(range(4), repeat=n)), dtype=np.uint8)
    ex = ((kinds == 1) | (kinds == 2)).astype(int)
    ez = ((kinds == 2) | (kinds == 3)).astype(int)
    syn = (ez @ c.stab_x.T + ex @ c.stab_z.T) % 2
    lf = np.stack([(ez @ c.logical_x[0] + ex @ c.logical_x[1]) % 2,
                   (ez @ c.logical_z[0] + ex @ c.logical_z[1]) % 2], 1)
    bad = (~syn.any(1)) & lf.any(1)
    assert (kinds[bad] > 0).sum(1).min() == 3


@pytest.mark.parametrize("d", [3, 5])
def test_all_single_paulis_corrected(d):
    c = build_code(d)
    for q in range(c.n):
        for k in (1, 2, 3):
            r = decode_shot(c, *_single(c, q, k), 0.01)
            assert not r.failed and not r.residual_syndrome


def test_d5_corrects_all_weight_two_paulis():
    c = build_code(5)
    for q1, q2 in itertools.combinations(range(c.n), 2):
        for k1, k2 in itertools.product((1, 2, 3), repeat=2):
            ex = np.zeros(c.n, np.uint8)
            ez = np.zeros(c.n, np.uint8)
            for q, k in ((q1, k1), (q2, k2)):
                ex[q] = k in (1, 2)
                ez[q] = k in (2, 3)
            assert not decode_shot(c, ex, ez, np.zeros(c.n, bool), 0.01).failed


def test_d5_corrects_four_erasures(rng):
    c = build_code(5)
    for _ in range(300):
        qs = rng.choice(c.n, 4, replace=False)
        kinds = rng.integers(0, 4, 4)
        ex = np.zeros(c.n, np.uint8)
        ez = np.zeros(c.n, np.uint8)
        er = np.zeros(c.n, bool)
        er[qs] = True
        ex[qs] = (kinds == 1) | (kinds == 2)
        ez[qs] = (kinds == 2) | (kinds == 3)
        r = decode_shot(c, ex, ez, er, 0.01)
        assert not r.failed and not r.residual_syndrome


def test_sampling_is_deterministic():
    c = build_code(3)
    a = sample_and_decode(c, 0.1, 0.02, 3000, seed=7)
    b = sample_and_decode(c, 0.1, 0.02, 3000, seed=7)
    assert a.p_L == b.p_L and a.failures == b.failures


def test_invalid_rates():
    with pytest.raises(ValueError):
        sample_and_decode(build_code(3), 0.7, 0.5, 10)


def test_stratified_agrees_with_direct():
    c = build_code(3)
    d = sample_and_decode(c, 0.05, 0.02, 20000, seed=1)
    s = stratified_estimate(c, 0.05, 0.02, 20000, seed=1)
    assert abs(d.p_L - s.p_L) < 4 * np.hypot(d.stderr, s.stderr)


def test_larger_code_suppresses_erasures():
    a = stratified_estimate(build_code(3), 0.1, 0.0, 20000, seed=2)
    b = stratified_estimate(build_code(5), 0.1, 0.0, 20000, seed=2)
    assert b.p_L < 0.2 * a.p_L


def test_logical_rate_zero_budget():
    b = GateErrorBudget(F=1.0, F_err=0, Fc=1.0, Fc_err=0, p_d=0, p_d_err=0, p_e=0.0, p_p=0.0,
                        R_e=float("nan"), eta_e=float("inf"))
    assert logical_rate(b, build_code(3)).p_L == 0.0
