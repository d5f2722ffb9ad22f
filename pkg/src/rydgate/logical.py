"""XZZX surface code under erasure and Pauli errors (one perfect round).

The XZZX code is the rotated surface code with a Hadamard on every qubit
of odd checkerboard parity, so every plaquette reads X Z Z X on its
corners (NW, NE, SW, SE).  Decoding undoes that Hadamard frame and treats
the X and Z parts separately: erasures are peeled cluster by cluster, any
remaining defects are paired by exact minimum-weight matching on the
lattice graph with erased edges at zero weight.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.stats import multinomial

BLOCK = 1000
MAX_EXACT_DEFECTS = 20


@dataclass
class _Graph:
    """Decoding graph of one check type: nodes are checks plus a boundary node."""

    n_checks: int
    edges: list            # per qubit: (u, v), v == n_checks for the boundary
    adj: list = field(default_factory=list)

    def __post_init__(self):
        self.adj = [[] for _ in range(self.n_checks + 1)]
        for q, (u, v) in enumerate(self.edges):
            self.adj[u].append((v, q))
            self.adj[v].append((u, q))
        for a in self.adj:
            a.sort()

    @property
    def boundary(self) -> int:
        return self.n_checks


@dataclass
class CodeSpec:
    """Distance-``d`` XZZX code; qubit ``(i, j)`` has index ``i * d + j``."""

    d: int
    stab_x: np.ndarray      # (n_stab, n) X part of each stabilizer (symplectic)
    stab_z: np.ndarray
    logical_x: tuple        # (x part, z part)
    logical_z: tuple
    hadamard: np.ndarray    # qubits carrying the frame Hadamard
    graph_x: _Graph         # decodes CSS-frame X errors (from Z-type checks)
    graph_z: _Graph         # decodes CSS-frame Z errors (from X-type checks)
    css_z_checks: np.ndarray
    css_x_checks: np.ndarray
    variant: str = "XZZX"
    rounds: int = 1

    @property
    def n(self) -> int:
        return self.d * self.d

    def syndrome(self, ex: np.ndarray, ez: np.ndarray) -> np.ndarray:
        """Stabilizer outcomes (1 = anticommutes) of a Pauli given in XZZX frame."""
        return (self.stab_x @ ez + self.stab_z @ ex) % 2

    def logical_flips(self, ex, ez):
        lx, lz = self.logical_x, self.logical_z
        return int((lx[0] @ ez + lx[1] @ ex) % 2), int((lz[0] @ ez + lz[1] @ ex) % 2)


def build_code(d: int) -> CodeSpec:
    """Rotated layout, ``d**2`` data qubits, ``d**2 - 1`` XZZX plaquettes.

    Boundary conventions (CSS frame before the Hadamards): weight-2 X
    checks on the top and bottom edges, weight-2 Z checks on the left and
    right edges; Z-type faces are those whose NW corner has odd ``i + j``.
    """
    if d < 3 or d % 2 == 0:
        raise ValueError("distance must be odd and at least 3")
    n = d * d
    idx = lambda i, j: i * d + j   # noqa: E731
    xc, zc = [], []
    for i in range(-1, d):
        for j in range(-1, d):
            corners = [(i + a, j + b) for a in (0, 1) for b in (0, 1)]
            inside = [(a, b) for a, b in corners if 0 <= a < d and 0 <= b < d]
            z_type = (i + j) % 2 != 0
            if len(inside) == 4:
                (zc if z_type else xc).append([idx(a, b) for a, b in inside])
            elif len(inside) == 2:
                top_bottom = i in (-1, d - 1)
                left_right = j in (-1, d - 1)
                if top_bottom and not left_right and not z_type:
                    xc.append([idx(a, b) for a, b in inside])
                elif left_right and not top_bottom and z_type:
                    zc.append([idx(a, b) for a, b in inside])
    X = np.zeros((len(xc), n), dtype=np.uint8)
    Z = np.zeros((len(zc), n), dtype=np.uint8)
    for r, qs in enumerate(xc):
        X[r, qs] = 1
    for r, qs in enumerate(zc):
        Z[r, qs] = 1
    had = np.array([(q // d + q % d) % 2 == 1 for q in range(n)])
    # XZZX frame: swap X and Z parts on Hadamard qubits
    sx = np.vstack([X, np.zeros_like(Z)])
    sz = np.vstack([np.zeros_like(X), Z])
    sx2, sz2 = sx.copy(), sz.copy()
    sx2[:, had], sz2[:, had] = sz[:, had], sx[:, had]
    # CSS logicals: X along the left column (commutes with Z checks), Z along the top row
    lx = np.zeros(n, dtype=np.uint8)
    lx[[idx(i, 0) for i in range(d)]] = 1
    lz = np.zeros(n, dtype=np.uint8)
    lz[[idx(0, j) for j in range(d)]] = 1
    if np.any(Z @ lx % 2) or np.any(X @ lz % 2):
        lx, lz = lz.copy(), lx.copy()
    lxx, lxz = lx.copy(), np.zeros(n, dtype=np.uint8)
    lzx, lzz = np.zeros(n, dtype=np.uint8), lz.copy()
    lxx[had], lxz[had] = lxz[had], lx[had]
    lzx[had], lzz[had] = lz[had], lzx[had].copy()

    def graph(checks):
        m = len(checks)
        members = [[] for _ in range(n)]
        for r, qs in enumerate(checks):
            for q in qs:
                members[q].append(r)
        edges = [(c[0], c[1]) if len(c) == 2 else (c[0], m) for c in members]
        return _Graph(m, edges)

    return CodeSpec(d, sx2 % 2, sz2 % 2, (lxx, lxz), (lzx, lzz), had, graph(zc), graph(xc),
                    Z, X)


# --------------------------------------------------------------------------
# decoding


class _DSU:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a != b:
            self.p[max(a, b)] = min(a, b)
        return min(a, b)


def _peel(g: _Graph, erased: np.ndarray, defects: set):
    """Peeling decoder on erased edges.  Returns (correction qubits, unresolved defects)."""
    nb = g.n_checks + 1
    dsu = _DSU(nb)
    tree = []
    for q in np.flatnonzero(erased):
        u, v = g.edges[q]
        if dsu.find(u) != dsu.find(v):
            dsu.union(u, v)
            tree.append(q)
    # clusters whose defects can be neutralized inside the erasure
    parity = {}
    for u in defects:
        r = dsu.find(u)
        parity[r] = parity.get(r, 0) ^ 1
    broot = dsu.find(g.boundary)
    ok = {r for r, par in parity.items() if par == 0 or r == broot}
    todo = {u for u in defects if dsu.find(u) in ok}
    rest = set(defects) - todo
    if not todo:
        return [], rest
    # peel leaves of the spanning forest restricted to good clusters
    deg = {}
    inc = {}
    for q in tree:
        u, v = g.edges[q]
        if dsu.find(u) not in ok:
            continue
        for a in (u, v):
            deg[a] = deg.get(a, 0) + 1
            inc.setdefault(a, set()).add(q)
    syn = set(todo)
    corr = []
    leaves = sorted(a for a, k in deg.items() if k == 1 and a != g.boundary)
    heapq.heapify(leaves)
    while leaves:
        a = heapq.heappop(leaves)
        if deg.get(a, 0) != 1 or a == g.boundary:
            continue
        q = next(iter(inc[a]))
        u, v = g.edges[q]
        b = v if u == a else u
        inc[a].discard(q)
        inc[b].discard(q)
        deg[a] -= 1
        deg[b] -= 1
        if a in syn:
            corr.append(q)
            syn.discard(a)
            if b != g.boundary:
                syn ^= {b}
        if deg[b] == 1 and b != g.boundary:
            heapq.heappush(leaves, b)
    return corr, rest | syn


def _dijkstra(g: _Graph, src: int, weight):
    dist = [math.inf] * (g.n_checks + 1)
    prev = [(-1, -1)] * (g.n_checks + 1)
    dist[src] = 0.0
    pq = [(0.0, src)]
    done = [False] * (g.n_checks + 1)
    while pq:
        d0, u = heapq.heappop(pq)
        if done[u]:
            continue
        done[u] = True
        for v, q in g.adj[u]:
            nd = d0 + weight[q]
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = (u, q)
                heapq.heappush(pq, (nd, v))
    return dist, prev


def _path(prev, src, dst):
    out = []
    while dst != src:
        u, q = prev[dst]
        out.append(q)
        dst = u
    return out


def _match(g: _Graph, defects, weight):
    """Exact minimum-weight matching of defects (each may also go to the boundary)."""
    ds = sorted(defects)
    k = len(ds)
    if k == 0:
        return []
    sp = {u: _dijkstra(g, u, weight) for u in ds}
    bd = g.boundary
    if k > MAX_EXACT_DEFECTS:
        # greedy fallback for pathological shots
        pairs, left = [], set(ds)
        cand = sorted((sp[a][0][b], a, b) for a in ds for b in ds if a < b)
        for w, a, b in cand:
            if a in left and b in left and w < sp[a][0][bd] + sp[b][0][bd]:
                pairs.append((a, b))
                left -= {a, b}
        pairs += [(a, bd) for a in sorted(left)]
    else:
        full = (1 << k) - 1
        best = {0: (0.0, None)}

        def solve(mask):
            if mask in best:
                return best[mask][0]
            i = (mask & -mask).bit_length() - 1
            rest = mask & ~(1 << i)
            opt = (solve(rest) + sp[ds[i]][0][bd], (i, -1))
            j_bits = rest
            while j_bits:
                j = (j_bits & -j_bits).bit_length() - 1
                j_bits &= j_bits - 1
                c = solve(rest & ~(1 << j)) + sp[ds[i]][0][ds[j]]
                if c < opt[0] - 1e-12:
                    opt = (c, (i, j))
            best[mask] = opt
            return opt[0]

        solve(full)
        pairs, mask = [], full
        while mask:
            i, j = best[mask][1]
            if j < 0:
                pairs.append((ds[i], bd))
                mask &= ~(1 << i)
            else:
                pairs.append((ds[i], ds[j]))
                mask &= ~((1 << i) | (1 << j))
    corr = []
    for a, b in pairs:
        corr += _path(sp[a][1], a, b)
    return corr


def decode_component(g: _Graph, syndrome: np.ndarray, erased: np.ndarray,
                     p_edge: float) -> np.ndarray:
    """Correction (qubit flips in this component) for one check type."""
    defects = set(np.flatnonzero(syndrome).tolist())
    corr = np.zeros(len(g.edges), dtype=np.uint8)
    if not defects:
        return corr
    peeled, rest = _peel(g, erased, defects)
    for q in peeled:
        corr[q] ^= 1
    if rest:
        w_un = math.log((1 - p_edge) / p_edge) if 0 < p_edge < 0.5 else 1.0
        weight = np.where(erased, 0.0, w_un)
        for q in _match(g, rest, weight):
            corr[q] ^= 1
    return corr


@dataclass
class ShotResult:
    failed: bool
    residual_syndrome: bool


def decode_shot(code: CodeSpec, ex, ez, erased, p_edge: float) -> ShotResult:
    """Decode one error (XZZX frame) and report logical failure."""
    had = code.hadamard
    cx, cz = ex.copy(), ez.copy()
    cx[had], cz[had] = ez[had], ex[had]
    syn_for_x = code.css_z_checks @ cx % 2
    syn_for_z = code.css_x_checks @ cz % 2
    rx = decode_component(code.graph_x, syn_for_x, erased, p_edge)
    rz = decode_component(code.graph_z, syn_for_z, erased, p_edge)
    fx, fz = (cx ^ rx), (cz ^ rz)
    res = bool(np.any(code.css_z_checks @ fx % 2) or np.any(code.css_x_checks @ fz % 2))
    ox, oz = fx.copy(), fz.copy()
    ox[had], oz[had] = fz[had], fx[had]
    l1, l2 = code.logical_flips(ox, oz)
    return ShotResult(bool(l1 or l2), res)


# --------------------------------------------------------------------------
# sampling


@dataclass
class LogicalEstimate:
    p_L: float
    stderr: float
    shots: int
    failures: int = 0
    residual_syndromes: int = 0
    method: str = "direct"
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return {"p_L": self.p_L, "stderr": self.stderr, "shots": self.shots,
                "failures": self.failures, "method": self.method, **self.provenance}


def _pauli_bits(kind):
    # 0 = I, 1 = X, 2 = Y, 3 = Z
    return (kind == 1) | (kind == 2), (kind == 2) | (kind == 3)


def _edge_prob(p_e, p_p):
    # an unerased qubit flips a given CSS component with probability 2/3 p_p / (1 - p_e)
    return min(0.49, max(1e-12, (2.0 / 3.0) * p_p / max(1e-12, 1 - p_e)))


def sample_and_decode(code: CodeSpec, p_e: float, p_p: float, shots: int, seed: int = 0
                      ) -> LogicalEstimate:
    """Direct Monte Carlo estimate of the logical failure rate.

    Per qubit: erased with probability ``p_e`` (uniform random Pauli from
    I, X, Y, Z), otherwise a uniform X, Y or Z error with probability
    ``p_p``.  Shots are drawn in blocks of ``BLOCK`` whose generators are
    seeded by ``(seed, block index)``.
    """
    if not (0 <= p_e <= 1 and 0 <= p_p <= 1) or p_e + p_p > 1 + 1e-12:
        raise ValueError("need p_e, p_p in [0, 1] with p_e + p_p <= 1")
    n = code.n
    fails = residual = 0
    p_edge = _edge_prob(p_e, p_p)
    for b0 in range(0, shots, BLOCK):
        nb = min(BLOCK, shots - b0)
        rng = np.random.default_rng([seed, b0 // BLOCK])
        u = rng.random((nb, n))
        erased = u < p_e
        pauli = (u >= p_e) & (u < p_e + p_p)
        kind = np.where(erased, rng.integers(0, 4, (nb, n)),
                        np.where(pauli, rng.integers(1, 4, (nb, n)), 0))
        ex, ez = _pauli_bits(kind)
        for s in range(nb):
            if not (ex[s].any() or ez[s].any()):
                continue
            r = decode_shot(code, ex[s].astype(np.uint8), ez[s].astype(np.uint8), erased[s],
                            p_edge)
            fails += r.failed
            residual += r.residual_syndrome
    p = fails / shots
    return LogicalEstimate(p, math.sqrt(max(p * (1 - p), 1.0 / shots ** 2) / shots), shots,
                           fails, residual, "direct")


def stratified_estimate(code: CodeSpec, p_e: float, p_p: float, shots: int, seed: int = 0,
                        max_faults: int | None = None, tail_tol: float = 1e-3
                        ) -> LogicalEstimate:
    """Logical failure rate by stratifying over the numbers of erasures and Pauli errors.

    ``P_L = sum_{a,b} P(a erasures, b Paulis) P(fail | a, b)``; each
    conditional rate is sampled with fault locations drawn uniformly.
    Strata are kept until the remaining probability mass is below
    ``tail_tol * P_L``; the dropped mass is added to the error bar.
    Resolves rates far below ``1/shots``.
    """
    n = code.n
    p_edge = _edge_prob(p_e, p_p)
    dist = multinomial(n, [p_e, p_p, max(0.0, 1 - p_e - p_p)])
    kmax = n if max_faults is None else max_faults
    strata = []
    for a, b in product(range(kmax + 1), repeat=2):
        if 0 < a + b <= kmax:
            w = float(dist.pmf([a, b, n - a - b]))
            if w > 0:
                strata.append((w, a, b))
    strata.sort(key=lambda t: -t[0])
    total_w = sum(w for w, _, _ in strata)
    per = max(20, shots // max(1, min(len(strata), 40)))
    rng_root = np.random.SeedSequence([seed, n, int(round(p_e * 1e12)), int(round(p_p * 1e12))])
    est, var, used, residual, fails_all = 0.0, 0.0, 0, 0, 0
    cum = 0.0
    for (w, a, b), child in zip(strata, rng_root.spawn(len(strata))):
        if used >= shots:
            break
        rng = np.random.default_rng(child)
        fails = 0
        for _ in range(per):
            perm = rng.permutation(n)
            erased = np.zeros(n, dtype=bool)
            erased[perm[:a]] = True
            kind = np.zeros(n, dtype=np.int64)
            kind[perm[:a]] = rng.integers(0, 4, a)
            kind[perm[a:a + b]] = rng.integers(1, 4, b)
            ex, ez = _pauli_bits(kind)
            r = decode_shot(code, ex.astype(np.uint8), ez.astype(np.uint8), erased, p_edge)
            fails += r.failed
            residual += r.residual_syndrome
        used += per
        fails_all += fails
        q = fails / per
        est += w * q
        var += w * w * max(q * (1 - q), 1.0 / per) / per
        cum += w
        if est > 0 and total_w - cum < tail_tol * est:
            break
    tail = max(0.0, total_w - cum)
    return LogicalEstimate(est, math.sqrt(var) + tail, used, fails_all, residual, "stratified")


def logical_rate(budget, code: CodeSpec | None = None, shots: int = 100_000, seed: int = 0,
                 method: str = "stratified") -> LogicalEstimate:
    """Logical error rate for the erasure split of a gate error budget."""
    code = code or build_code(5)
    if budget.p_e + budget.p_p == 0:
        est = LogicalEstimate(0.0, 0.0, 0, method=method)
    elif method == "stratified":
        est = stratified_estimate(code, budget.p_e, budget.p_p, shots, seed)
    else:
        est = sample_and_decode(code, budget.p_e, budget.p_p, shots, seed)
    est.provenance = {"pulse": budget.label, "sigma_eps": budget.sigma_eps, "T_K": budget.T_K,
                      "p_e": budget.p_e, "p_p": budget.p_p, "d": code.d}
    return est
