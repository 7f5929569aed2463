'''
Binary linear codes and their Tanner graphs.

Codewords are length-d bit vectors c = G u over GF(2) for a k-bit message u.
The BPSK map sends bit 0 to +sqrt(E) and bit 1 to -sqrt(E), so each user's
transmitted row lives in {+-sqrt(E)}^d.

Shipped codes: the (7,4) Hamming code, an uncoded single-bit "code", and two
quasi-cyclic LDPC codes of length 648 (rates 1/2 and 5/6) built from fixed
seeds with 4-cycle-free circulant exponents, so their girth is at least 6.
Arbitrary parity-check matrices load from alist files.
'''

import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .rng import stream


# ---------------------------------------------------------------- GF(2) core

def gf2_rref(M):
    '''
    Reduced row echelon form over GF(2).
    Returns (R, pivot_cols). No column permutation is ever applied, so bit
    positions keep their original meaning.
    '''
    R = np.array(M, dtype=np.uint8, copy=True) % 2
    m, d = R.shape
    pivots = []
    r = 0
    for col in range(d):
        rows = np.nonzero(R[r:, col])[0]
        if rows.size == 0:
            continue
        p = r + rows[0]
        if p != r:
            R[[r, p]] = R[[p, r]]
        mask = R[:, col].astype(bool)
        mask[r] = False
        R[mask] ^= R[r]
        pivots.append(col)
        r += 1
        if r == m:
            break
    return R, pivots


def gf2_rank(M):
    return len(gf2_rref(M)[1])


def _independent_rows(H):
    '''Indices of a maximal linearly independent subset of H's rows (greedy).'''
    m, d = H.shape
    basis = np.zeros((0, d), dtype=np.uint8)
    keep = []
    rank = 0
    for i in range(m):
        cand = np.vstack([basis, H[i:i + 1]])
        if gf2_rank(cand) > rank:
            basis = cand
            rank += 1
            keep.append(i)
    return keep


# -------------------------------------------------------------------- types

@dataclass
class LinearCode:
    '''
    A binary linear code in systematic-by-position form.

    G is d x k with G[systematic_positions] = I_k, so encode() places the
    message bits verbatim at systematic_positions and H @ G = 0 (mod 2).
    H rows are linearly independent (dependent rows are dropped, with a
    warning, before a code is built).
    '''
    k: int
    d: int
    G: np.ndarray
    H: np.ndarray
    systematic_positions: np.ndarray

    def __post_init__(self):
        self.G = np.ascontiguousarray(self.G, dtype=np.uint8)
        self.H = np.ascontiguousarray(self.H, dtype=np.uint8)
        self.systematic_positions = np.asarray(self.systematic_positions, dtype=np.int64)
        assert self.G.shape == (self.d, self.k)
        assert self.H.shape[1] == self.d or self.H.size == 0
        assert 1 <= self.k <= self.d
        assert set(np.unique(self.G)) <= {0, 1} and set(np.unique(self.H)) <= {0, 1}
        if self.H.size:
            assert not ((self.H.astype(np.int64) @ self.G.astype(np.int64)) % 2).any(), \
                'H G != 0 over GF(2)'
        assert np.array_equal(self.G[self.systematic_positions], np.eye(self.k, dtype=np.uint8))
        self.G.flags.writeable = False
        self.H.flags.writeable = False
        self.systematic_positions.flags.writeable = False

    @property
    def rate(self):
        return self.k / self.d


@dataclass
class TannerGraph:
    '''
    Bipartite factor graph of a parity-check matrix, with flat edge arrays
    and padded per-node edge indices for vectorized message passing.
    Edges are numbered in row-major (check-major) order of H's support.
    '''
    H: np.ndarray
    d: int = field(init=False)
    num_checks: int = field(init=False)
    edge_check: np.ndarray = field(init=False)
    edge_var: np.ndarray = field(init=False)
    check_edges: np.ndarray = field(init=False)   # (m, max_cdeg), -1 padded
    check_mask: np.ndarray = field(init=False)
    var_edges: np.ndarray = field(init=False)     # (d, max_vdeg), -1 padded
    var_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        H = np.ascontiguousarray(self.H, dtype=np.uint8)
        assert H.ndim == 2
        self.H = H
        m, d = H.shape
        self.num_checks = m
        self.d = d
        chk, var = np.nonzero(H)
        self.edge_check = chk.astype(np.int64)
        self.edge_var = var.astype(np.int64)
        self.check_edges, self.check_mask = _group_edges(chk, m)
        self.var_edges, self.var_mask = _group_edges(var, d)
        self._girth = None

    @property
    def num_edges(self):
        return self.edge_var.size

    def check_neighbors(self, i):
        return self.edge_var[self.check_edges[i][self.check_mask[i]]]

    def var_neighbors(self, j):
        return self.edge_check[self.var_edges[j][self.var_mask[j]]]

    def edge_id(self, i, j):
        '''Edge index for check i, variable j (must exist).'''
        e = self.check_edges[i][self.check_mask[i]]
        hit = e[self.edge_var[e] == j]
        assert hit.size == 1, f'no edge between check {i} and variable {j}'
        return int(hit[0])


def _group_edges(owner, count):
    '''Pad edge ids grouped by owner node into a (count, max_deg) table.'''
    order = np.argsort(owner, kind='stable')
    degs = np.bincount(owner, minlength=count)
    maxdeg = int(degs.max()) if count else 0
    idx = np.full((count, max(maxdeg, 1)), -1, dtype=np.int64)
    mask = np.zeros_like(idx, dtype=bool)
    pos = 0
    for node in range(count):
        dd = degs[node]
        idx[node, :dd] = order[pos:pos + dd]
        mask[node, :dd] = True
        pos += dd
    return idx, mask


def tanner_graph(H):
    return TannerGraph(np.asarray(H))


@dataclass
class Codebook:
    '''All 2^k codewords of a code, mapped to +-sqrt(E) rows.'''
    words: np.ndarray         # (2^k, d) float64
    bits: np.ndarray          # (2^k, d) uint8
    E: float
    k: int
    d: int

    def __post_init__(self):
        assert self.words.shape == (2 ** self.k, self.d)
        self.words.flags.writeable = False
        self.bits.flags.writeable = False


# ---------------------------------------------------------------- operations

def generator_from_parity(H):
    '''
    Build a LinearCode from a parity-check matrix.

    Dependent rows of H are dropped with a warning. The information set is
    the non-pivot columns of the GF(2) RREF; no column permutation is used,
    so codewords stay in the original bit order. Raises if H has full column
    rank (no information positions left).
    '''
    H = np.asarray(H, dtype=np.uint8)
    assert H.ndim == 2 and H.shape[1] >= 1
    assert set(np.unique(H)) <= {0, 1}
    m, d = H.shape
    R, pivots = gf2_rref(H)
    rank = len(pivots)
    if rank < m:
        warnings.warn(f'parity-check matrix has {m - rank} dependent rows; dropping them')
        H = H[_independent_rows(H)]
    k = d - rank
    if k <= 0:
        raise ValueError('parity-check matrix has full column rank: no message bits')
    free = sorted(set(range(d)) - set(pivots))
    G = np.zeros((d, k), dtype=np.uint8)
    for j, f in enumerate(free):
        G[f, j] = 1
        for i, p in enumerate(pivots):
            G[p, j] = R[i, f]
    return LinearCode(k=k, d=d, G=G, H=H, systematic_positions=np.array(free))


def encode(code, u):
    '''
    Encode message bits. u is (k,) or (N, k) in {0,1}; returns codeword bits
    of shape (d,) or (N, d). Message bits appear verbatim at
    code.systematic_positions.
    '''
    u = np.asarray(u, dtype=np.uint8)
    single = u.ndim == 1
    if single:
        u = u[None, :]
    assert u.shape[1] == code.k
    # float matmul is exact here (row sums < 2^53) and much faster than uint8
    bits = (u.astype(np.float64) @ code.G.T.astype(np.float64)) % 2
    bits = bits.astype(np.uint8)
    return bits[0] if single else bits


def bpsk_map(bits, E):
    '''Map bit 0 to +sqrt(E) and bit 1 to -sqrt(E).'''
    assert E > 0
    bits = np.asarray(bits)
    return (1.0 - 2.0 * bits.astype(np.float64)) * math.sqrt(E)


def satisfies_checks(H, bits):
    '''True (per row) when bits satisfy every parity check of H.'''
    bits = np.asarray(bits, dtype=np.float64)
    if H.size == 0:
        shape = bits.shape[:-1]
        return np.ones(shape, dtype=bool) if shape else True
    syn = (bits @ H.T.astype(np.float64)) % 2
    return ~syn.any(axis=-1)


def enumerate_codebook(code, E):
    '''
    Materialize the full codebook as +-sqrt(E) rows. Guarded to k <= 20.
    Row m corresponds to the message whose bit j is (m >> j) & 1.
    '''
    assert code.k <= 20, 'codebook enumeration is limited to k <= 20'
    msgs = ((np.arange(2 ** code.k, dtype=np.int64)[:, None]
             >> np.arange(code.k, dtype=np.int64)[None, :]) & 1).astype(np.uint8)
    bits = encode(code, msgs)
    return Codebook(words=bpsk_map(bits, E), bits=bits, E=float(E), k=code.k, d=code.d)


def girth(obj):
    '''
    Length of the shortest cycle of a Tanner graph (or parity-check matrix).
    Returns math.inf for forests. BFS from every variable node; the minimum
    over roots of dist(u) + dist(v) + 1 at the first non-tree edge is exact.
    '''
    g = obj if isinstance(obj, TannerGraph) else tanner_graph(obj)
    if g._girth is not None:
        return g._girth
    n = g.d + g.num_checks
    adj = [[] for _ in range(n)]
    for e in range(g.num_edges):
        j = int(g.edge_var[e])
        i = g.d + int(g.edge_check[e])
        adj[j].append((i, e))
        adj[i].append((j, e))
    best = math.inf
    for root in range(g.d):
        dist = np.full(n, -1, dtype=np.int64)
        pedge = np.full(n, -1, dtype=np.int64)
        dist[root] = 0
        q = deque([root])
        while q:
            u = q.popleft()
            if 2 * dist[u] >= best:
                continue
            for v, e in adj[u]:
                if e == pedge[u]:
                    continue
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    pedge[v] = e
                    q.append(v)
                else:
                    cand = dist[u] + dist[v] + 1
                    if cand < best:
                        best = cand
    g._girth = best if best is math.inf else int(best)
    return g._girth


# ------------------------------------------------------------ shipped codes

def hamming74():
    '''The (7,4) Hamming code; column i of H is the binary expansion of i+1.'''
    H = np.array([[1, 0, 1, 0, 1, 0, 1],
                  [0, 1, 1, 0, 0, 1, 1],
                  [0, 0, 0, 1, 1, 1, 1]], dtype=np.uint8)
    return generator_from_parity(H)


def uncoded():
    '''Single uncoded bit: k = d = 1, no parity checks.'''
    return LinearCode(k=1, d=1,
                      G=np.array([[1]], dtype=np.uint8),
                      H=np.zeros((0, 1), dtype=np.uint8),
                      systematic_positions=np.array([0]))


def chain_code(n_checks):
    '''
    Cycle-free code whose Tanner graph is a caterpillar: check j touches
    variables 2j, 2j+1, 2j+2, so consecutive checks share one variable and
    the graph is a tree (girth infinity). d = 2 n_checks + 1, k = n_checks + 1.
    Handy wherever message passing must be exact.
    '''
    assert n_checks >= 1
    d = 2 * n_checks + 1
    H = np.zeros((n_checks, d), dtype=np.uint8)
    for j in range(n_checks):
        H[j, 2 * j:2 * j + 3] = 1
    return generator_from_parity(H)


def make_qc_ldpc(base_rows, base_cols, z, col_weight, seed, max_tries=200):
    '''
    Quasi-cyclic LDPC parity-check matrix: a (base_rows x base_cols) protograph
    with column weight col_weight, each filled cell expanded to a cyclically
    shifted z x z identity. The protograph and circulant exponents are redrawn
    until the expanded graph has no 4-cycles and full GF(2) row rank, so girth
    >= 6 and k = z * (base_cols - base_rows) exactly. Deterministic in seed.
    '''
    assert 1 <= col_weight <= base_rows and base_cols > base_rows

    for attempt in range(max_tries):
        rng = stream(seed, 'qc', attempt)
        cols = [sorted(rng.choice(base_rows, size=col_weight, replace=False).tolist())
                for _ in range(base_cols)]
        rdeg = np.bincount(np.concatenate(cols), minlength=base_rows)
        if rdeg.min() < 2:
            continue
        expo = np.full((base_rows, base_cols), -1, dtype=np.int64)
        ok = True
        for j in range(base_cols):
            for _ in range(4000):
                cand = rng.integers(0, z, size=col_weight)
                if _col_ok(expo, cols, j, cand, z):
                    expo[cols[j], j] = cand
                    break
            else:
                ok = False
                break
        if not ok:
            continue
        H = _expand_qc(expo, z)
        if gf2_rank(H) == z * base_rows:
            return H
    raise RuntimeError('no valid exponent assignment found; raise max_tries or change z')


def _col_ok(expo, cols, j, cand, z):
    '''No 4-cycle between column j (shifts cand) and any earlier column.'''
    rows_j = cols[j]
    for j2 in range(j):
        shared = [r for r in rows_j if expo[r, j2] >= 0]
        for a in range(len(shared)):
            for b in range(a + 1, len(shared)):
                r1, r2 = shared[a], shared[b]
                d1 = cand[rows_j.index(r1)] - cand[rows_j.index(r2)]
                d2 = expo[r1, j2] - expo[r2, j2]
                if (d1 - d2) % z == 0:
                    return False
    return True


def _expand_qc(expo, z):
    base_rows, base_cols = expo.shape
    H = np.zeros((base_rows * z, base_cols * z), dtype=np.uint8)
    eye = np.eye(z, dtype=np.uint8)
    for r in range(base_rows):
        for c in range(base_cols):
            if expo[r, c] >= 0:
                H[r * z:(r + 1) * z, c * z:(c + 1) * z] = np.roll(eye, expo[r, c], axis=1)
    return H


_QC_SEED_RATE_HALF = 1
_QC_SEED_RATE_5_6 = 1


@lru_cache(maxsize=None)
def ldpc648(rate='1/2'):
    '''
    Shipped length-648 quasi-cyclic LDPC codes (z = 27, column weight 3).
    rate "1/2" gives k = 324, rate "5/6" gives k = 540.
    '''
    if rate == '1/2':
        H = make_qc_ldpc(12, 24, 27, 3, seed=_QC_SEED_RATE_HALF)
    elif rate == '5/6':
        H = make_qc_ldpc(4, 24, 27, 3, seed=_QC_SEED_RATE_5_6)
    else:
        raise ValueError(f'unknown rate {rate!r}; use "1/2" or "5/6"')
    return generator_from_parity(H)


# ------------------------------------------------------------------ alist IO

def load_alist(path):
    '''
    Read a parity-check matrix in alist format: line 1 "d m", line 2 max
    degrees, then per-column and per-row degree lists, then 1-indexed
    adjacency lists (0-padded entries tolerated). Cross-validates the
    column and row adjacency before returning H as (m, d) uint8.
    '''
    with open(path) as f:
        tokens = f.read().split()
    it = iter(int(t) for t in tokens)

    def take(n):
        return [next(it) for _ in range(n)]

    try:
        d, m = take(2)
        max_vdeg, max_cdeg = take(2)
        vdeg = take(d)
        cdeg = take(m)
        if max(vdeg, default=0) > max_vdeg or max(cdeg, default=0) > max_cdeg:
            raise ValueError('alist degree lists exceed declared maxima')
        H = np.zeros((m, d), dtype=np.uint8)
        # some writers pad rows to the max degree with zeros, some do not;
        # read exactly deg entries then swallow any zero padding
        remaining = list(it)
        pos = 0

        def read_adj(deg, maxdeg, total_lines):
            nonlocal pos
            out = []
            for node in range(total_lines):
                need = deg[node]
                vals = remaining[pos:pos + need]
                pos += need
                if any(v <= 0 for v in vals):
                    raise ValueError('alist adjacency entry out of range')
                extra = 0
                while (pos < len(remaining) and remaining[pos] == 0
                       and extra < maxdeg - need):
                    pos += 1
                    extra += 1
                out.append(vals)
            return out

        vadj = read_adj(vdeg, max_vdeg, d)
        cadj = read_adj(cdeg, max_cdeg, m)
    except StopIteration:
        raise ValueError('truncated alist file') from None

    for j, checks in enumerate(vadj):
        for i in checks:
            if not 1 <= i <= m:
                raise ValueError('alist check index out of range')
            H[i - 1, j] = 1
    H2 = np.zeros_like(H)
    for i, vs in enumerate(cadj):
        for j in vs:
            if not 1 <= j <= d:
                raise ValueError('alist variable index out of range')
            H2[i, j - 1] = 1
    if not np.array_equal(H, H2):
        raise ValueError('alist column and row adjacency disagree')
    if int(H.sum()) != sum(vdeg) or sum(vdeg) != sum(cdeg):
        raise ValueError('alist degree lists inconsistent with adjacency')
    return H


def write_alist(H, path):
    '''Write a parity-check matrix in alist format (0-padded adjacency).'''
    H = np.asarray(H, dtype=np.uint8)
    m, d = H.shape
    vdeg = H.sum(axis=0).astype(int)
    cdeg = H.sum(axis=1).astype(int)
    max_v, max_c = int(vdeg.max()), int(cdeg.max())
    lines = [f'{d} {m}', f'{max_v} {max_c}',
             ' '.join(map(str, vdeg)), ' '.join(map(str, cdeg))]
    for j in range(d):
        idx = (np.nonzero(H[:, j])[0] + 1).tolist()
        idx += [0] * (max_v - len(idx))
        lines.append(' '.join(map(str, idx)))
    for i in range(m):
        idx = (np.nonzero(H[i])[0] + 1).tolist()
        idx += [0] * (max_c - len(idx))
        lines.append(' '.join(map(str, idx)))
    with open(path, 'w') as f:
        f.write('\n'.join(lines) + '\n')


def code_from_alist(path):
    return generator_from_parity(load_alist(path))
