"""Compiled inner loops.

Every segment propagator has the form ``exp(-i theta) * M0 @ (exp(i theta) * z)``
with a diagonal phase vector ``theta``; ``M0`` is shared between segments that
differ only in drive phase.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def forward(m0s, idx, theta, z0):
    n_steps = idx.shape[0]
    m = z0.shape[0]
    out = np.empty((n_steps + 1, m), dtype=np.complex128)
    out[0] = z0
    w = np.empty(m, dtype=np.complex128)
    for s in range(n_steps):
        M = m0s[idx[s]]
        for a in range(m):
            w[a] = np.exp(1j * theta[s, a]) * out[s, a]
        for a in range(m):
            acc = 0j
            for b in range(m):
                acc += M[a, b] * w[b]
            out[s + 1, a] = np.exp(-1j * theta[s, a]) * acc
    return out


@njit(cache=True)
def backward(m0s, idx, theta, g_final):
    n_steps = idx.shape[0]
    m = g_final.shape[0]
    out = np.empty((n_steps + 1, m), dtype=np.complex128)
    out[n_steps] = g_final
    w = np.empty(m, dtype=np.complex128)
    for s in range(n_steps - 1, -1, -1):
        M = m0s[idx[s]]
        for a in range(m):
            w[a] = np.exp(1j * theta[s, a]) * out[s + 1, a]
        for a in range(m):
            acc = 0j
            for b in range(m):
                acc += np.conj(M[b, a]) * w[b]
            out[s, a] = np.exp(-1j * theta[s, a]) * acc
    return out


@njit(cache=True)
def forward_final_batch(m0s, idx, theta, z0):
    """Final states for a batch: m0s (B,K,m,m), theta (B,S,m), z0 (m,)."""
    n_batch = m0s.shape[0]
    n_steps = idx.shape[0]
    m = z0.shape[0]
    out = np.empty((n_batch, m), dtype=np.complex128)
    z = np.empty(m, dtype=np.complex128)
    w = np.empty(m, dtype=np.complex128)
    for bi in range(n_batch):
        for a in range(m):
            z[a] = z0[a]
        for s in range(n_steps):
            M = m0s[bi, idx[s]]
            for a in range(m):
                w[a] = np.exp(1j * theta[bi, s, a]) * z[a]
            for a in range(m):
                acc = 0j
                for b in range(m):
                    acc += M[a, b] * w[b]
                z[a] = np.exp(-1j * theta[bi, s, a]) * acc
        for a in range(m):
            out[bi, a] = z[a]
    return out


@njit(cache=True)
def forward_from_batch(m0s, idx, theta, z_init):
    """Like forward_final_batch but with a per-sample initial state (B,m)."""
    n_batch = m0s.shape[0]
    n_steps = idx.shape[0]
    m = z_init.shape[1]
    out = np.empty((n_batch, m), dtype=np.complex128)
    z = np.empty(m, dtype=np.complex128)
    w = np.empty(m, dtype=np.complex128)
    for bi in range(n_batch):
        for a in range(m):
            z[a] = z_init[bi, a]
        for s in range(n_steps):
            M = m0s[bi, idx[s]]
            for a in range(m):
                w[a] = np.exp(1j * theta[bi, s, a]) * z[a]
            for a in range(m):
                acc = 0j
                for b in range(m):
                    acc += M[a, b] * w[b]
                z[a] = np.exp(-1j * theta[bi, s, a]) * acc
        for a in range(m):
            out[bi, a] = z[a]
    return out


@njit(cache=True)
def _taylor_step(H, h, z, out, term, nxt):
    """out <- exp(-i h H) z by a Taylor series (h ||H|| is small on sub-steps)."""
    m = z.shape[0]
    for a in range(m):
        term[a] = z[a]
        out[a] = z[a]
    for k in range(1, 40):
        big = 0.0
        for a in range(m):
            acc = 0j
            for b in range(m):
                acc += H[a, b] * term[b]
            nxt[a] = -1j * h * acc / k
        for a in range(m):
            term[a] = nxt[a]
            out[a] += nxt[a]
            v = abs(nxt[a].real) + abs(nxt[a].imag)
            if v > big:
                big = v
        if big < 1e-18:
            break


@njit(cache=True)
def doppler_batch(amp, phase, h, eps1, eps2, det1, det2, jump_idx, jump1, jump2, gamma, zeta):
    """Final states of all three sectors for a batch of samples.

    Exact |11> basis.  ``det1``/``det2`` (B, S) are per-sub-step detunings of
    each atom; at sub-step ``jump_idx`` the Rydberg amplitudes of atom i are
    multiplied by ``jump_i[b]`` (frame change or free decay between halves).
    """
    B = eps1.shape[0]
    S = amp.shape[0]
    f10 = np.empty((B, 2), dtype=np.complex128)
    f01 = np.empty((B, 2), dtype=np.complex128)
    f11 = np.empty((B, 3), dtype=np.complex128)
    H2 = np.zeros((2, 2), dtype=np.complex128)
    H3 = np.zeros((3, 3), dtype=np.complex128)
    for bi in range(B):
        e1 = eps1[bi]
        e2 = eps2[bi]
        for sec in range(3):
            m = 3 if sec == 2 else 2
            z = np.zeros(m, dtype=np.complex128)
            z[0] = 1.0
            out = np.empty(m, dtype=np.complex128)
            term = np.empty(m, dtype=np.complex128)
            nxt = np.empty(m, dtype=np.complex128)
            for s in range(S):
                if s == jump_idx:
                    if sec == 0:
                        z[1] *= jump1[bi]
                    elif sec == 1:
                        z[1] *= jump2[bi]
                    else:
                        z[1] *= jump1[bi]
                        z[2] *= jump2[bi]
                om = amp[s] * np.exp(1j * phase[s])
                a2 = amp[s] * amp[s]
                d1 = det1[bi, s] + zeta * e1 * a2 - 0.5j * gamma
                d2 = det2[bi, s] + zeta * e2 * a2 - 0.5j * gamma
                if sec == 2:
                    c1 = (1 + e1) * om / 2
                    c2 = (1 + e2) * om / 2
                    H3[0, 1] = c1
                    H3[0, 2] = c2
                    H3[1, 0] = np.conj(c1)
                    H3[2, 0] = np.conj(c2)
                    H3[1, 1] = d1
                    H3[2, 2] = d2
                    _taylor_step(H3, h[s], z, out, term, nxt)
                else:
                    c = (1 + (e1 if sec == 0 else e2)) * om / 2
                    H2[0, 1] = c
                    H2[1, 0] = np.conj(c)
                    H2[1, 1] = d1 if sec == 0 else d2
                    _taylor_step(H2, h[s], z, out, term, nxt)
                for a in range(m):
                    z[a] = out[a]
            for a in range(m):
                if sec == 0:
                    f10[bi, a] = z[a]
                elif sec == 1:
                    f01[bi, a] = z[a]
                else:
                    f11[bi, a] = z[a]
    return f10, f01, f11
