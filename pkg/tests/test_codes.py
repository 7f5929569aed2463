import math
import warnings
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ampmac import codes
from ampmac.rng import stream


# ------------------------------------------------------------------ oracles

def girth_oracle(H):
    '''
    Independent girth computation: for every edge (u, v), remove it and BFS
    the shortest remaining u-v path; the minimum path length + 1 over all
    edges is the girth. Quadratic and slow, only for small graphs.
    '''
    m, d = H.shape
    n = m + d
    edges = [(d + i, j) for i, j in zip(*np.nonzero(H))]
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    best = math.inf
    for u, v in edges:
        dist = {u: 0}
        q = deque([u])
        while q:
            x = q.popleft()
            for y in adj[x]:
                if (x, y) == (u, v) or (y, x) == (v, u):
                    continue
                if y not in dist:
                    dist[y] = dist[x] + 1
                    q.append(y)
        if v in dist:
            best = min(best, dist[v] + 1)
    return best


def encode_oracle(G, u):
    '''Bit-by-bit GF(2) matrix-vector product.'''
    d, k = G.shape
    out = np.zeros(d, dtype=np.uint8)
    for i in range(d):
        acc = 0
        for j in range(k):
            acc ^= int(G[i, j]) & int(u[j])
        out[i] = acc
    return out


# ----------------------------------------------------------------- gf2 core

@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 8), st.integers(1, 10))
@settings(max_examples=50, deadline=None)
def test_rref_reproduces_row_space(seed, m, d):
    H = stream(seed, 'h').integers(0, 2, size=(m, d)).astype(np.uint8)
    R, pivots = codes.gf2_rref(H)
    assert codes.gf2_rank(R) == len(pivots)
    # row spaces agree: every row of H reduces to zero against R and vice versa
    both = np.vstack([H, R])
    assert codes.gf2_rank(both) == len(pivots)
    for r, c in zip(range(len(pivots)), pivots):
        col = R[:, c]
        assert col[r] == 1 and col.sum() == 1


def test_independent_rows_greedy():
    H = np.array([[1, 0, 1], [0, 1, 1], [1, 1, 0]], dtype=np.uint8)  # row2 = row0 ^ row1
    assert codes._independent_rows(H) == [0, 1]


# --------------------------------------------------------------- encode/map

@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_encode_matches_oracle_and_is_linear(seed):
    rng = stream(seed, 'enc')
    code = codes.hamming74()
    u1 = rng.integers(0, 2, size=4).astype(np.uint8)
    u2 = rng.integers(0, 2, size=4).astype(np.uint8)
    c1 = codes.encode(code, u1)
    assert np.array_equal(c1, encode_oracle(code.G, u1))
    c12 = codes.encode(code, (u1 ^ u2))
    assert np.array_equal(c12, codes.encode(code, u1) ^ codes.encode(code, u2))
    assert np.array_equal(c1[code.systematic_positions], u1)
    assert codes.satisfies_checks(code.H, c1)


def test_encode_batched_and_zero_message():
    code = codes.hamming74()
    U = stream(3, 'batch').integers(0, 2, size=(50, 4)).astype(np.uint8)
    C = codes.encode(code, U)
    assert C.shape == (50, 7)
    for i in range(50):
        assert np.array_equal(C[i], codes.encode(code, U[i]))
    assert not codes.encode(code, np.zeros(4, dtype=np.uint8)).any()


def test_bpsk_map_signs_and_energy():
    bits = np.array([0, 1, 1, 0], dtype=np.uint8)
    x = codes.bpsk_map(bits, 2.5)
    assert np.allclose(x, [np.sqrt(2.5), -np.sqrt(2.5), -np.sqrt(2.5), np.sqrt(2.5)])
    assert np.allclose(x ** 2, 2.5)


# ------------------------------------------------------- generator_from_parity

def test_dependent_rows_dropped_with_warning():
    H = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [1, 0, 1, 0]], dtype=np.uint8)
    with pytest.warns(UserWarning, match='dependent'):
        code = codes.generator_from_parity(H)
    assert code.k == 2 and code.H.shape == (2, 4)


def test_full_column_rank_refused():
    with pytest.raises(ValueError):
        codes.generator_from_parity(np.eye(3, dtype=np.uint8))


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 7), st.integers(3, 10))
@settings(max_examples=40, deadline=None)
def test_generator_from_parity_random(seed, m, d):
    if m >= d:
        return
    H = stream(seed, 'gfp').integers(0, 2, size=(m, d)).astype(np.uint8)
    if codes.gf2_rank(H) == d:
        return
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        code = codes.generator_from_parity(H)
    assert code.k == d - codes.gf2_rank(H)
    # every codeword satisfies the original checks
    book = codes.enumerate_codebook(code, 1.0)
    assert codes.satisfies_checks(H, book.bits).all()
    # codewords are distinct
    assert len({w.tobytes() for w in book.bits}) == 2 ** code.k


# ------------------------------------------------------------------ hamming

def test_hamming74_codebook():
    code = codes.hamming74()
    assert (code.k, code.d) == (4, 7)
    book = codes.enumerate_codebook(code, 1.0)
    assert book.words.shape == (16, 7)
    assert set(np.unique(book.words)) == {-1.0, 1.0}
    # minimum distance 3
    dists = [(book.bits[a] ^ book.bits[b]).sum()
             for a in range(16) for b in range(a + 1, 16)]
    assert min(dists) == 3


def test_uncoded_code():
    code = codes.uncoded()
    assert (code.k, code.d) == (1, 1)
    book = codes.enumerate_codebook(code, 4.0)
    assert sorted(book.words.ravel().tolist()) == [-2.0, 2.0]
    assert codes.girth(codes.tanner_graph(code.H)) == math.inf


def test_enumerate_codebook_guard():
    big = codes.LinearCode(k=21, d=21, G=np.eye(21, dtype=np.uint8),
                           H=np.zeros((0, 21), dtype=np.uint8),
                           systematic_positions=np.arange(21))
    with pytest.raises(AssertionError):
        codes.enumerate_codebook(big, 1.0)


# -------------------------------------------------------------------- girth

def test_girth_known_cases():
    # single 4-cycle
    H = np.array([[1, 1], [1, 1]], dtype=np.uint8)
    assert codes.girth(H) == 4
    # ring of length 2m, m = 5
    m = 5
    Hr = np.zeros((m, m), dtype=np.uint8)
    for i in range(m):
        Hr[i, i] = Hr[i, (i + 1) % m] = 1
    assert codes.girth(Hr) == 2 * m
    # tree: no cycle
    Ht = np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)
    assert codes.girth(Ht) == math.inf
    assert codes.girth(codes.hamming74().H) == 4


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 8), st.integers(2, 10), st.floats(0.15, 0.6))
@settings(max_examples=60, deadline=None)
def test_girth_matches_oracle(seed, m, d, density):
    H = (stream(seed, 'gir').random((m, d)) < density).astype(np.uint8)
    assert codes.girth(H) == girth_oracle(H)


def test_tanner_graph_structure():
    code = codes.hamming74()
    g = codes.tanner_graph(code.H)
    assert g.num_edges == int(code.H.sum())
    for i in range(g.num_checks):
        assert np.array_equal(np.sort(g.check_neighbors(i)), np.nonzero(code.H[i])[0])
    for j in range(g.d):
        assert np.array_equal(np.sort(g.var_neighbors(j)), np.nonzero(code.H[:, j])[0])
    e = g.edge_id(0, 2)
    assert g.edge_check[e] == 0 and g.edge_var[e] == 2


# ------------------------------------------------------------- shipped LDPC

@pytest.mark.parametrize('rate,m,k', [('1/2', 324, 324), ('5/6', 108, 540)])
def test_ldpc648(rate, m, k):
    code = codes.ldpc648(rate)
    assert (code.d, code.k) == (648, k)
    assert code.H.shape == (m, 648)
    assert codes.gf2_rank(code.H) == m
    assert tuple(code.H.sum(axis=0)) == (3,) * 648  # column weight 3
    assert codes.girth(code.H) >= 6
    # quasi-cyclic: every 27x27 block is zero or a shifted identity
    z = 27
    for r in range(m // z):
        for c in range(648 // z):
            blk = code.H[r * z:(r + 1) * z, c * z:(c + 1) * z]
            s = blk.sum()
            assert s in (0, z)
            if s == z:
                assert (blk.sum(axis=0) == 1).all() and (blk.sum(axis=1) == 1).all()


def test_ldpc648_bad_rate():
    with pytest.raises(ValueError):
        codes.ldpc648('2/3')


# ----------------------------------------------------------------- alist IO

def test_alist_roundtrip(tmp_path):
    code = codes.hamming74()
    p = tmp_path / 'h.alist'
    codes.write_alist(code.H, p)
    H2 = codes.load_alist(p)
    assert np.array_equal(H2, code.H)
    code2 = codes.code_from_alist(p)
    assert np.array_equal(code2.G, code.G)


def test_alist_roundtrip_ldpc(tmp_path):
    H = codes.ldpc648('5/6').H
    p = tmp_path / 'c.alist'
    codes.write_alist(H, p)
    assert np.array_equal(codes.load_alist(p), H)


def test_alist_unpadded_accepted(tmp_path):
    # same matrix, written without zero padding
    text = '3 2\n2 2\n1 2 1\n2 2\n1\n1 2\n2\n1 2\n2 3\n'
    p = tmp_path / 'u.alist'
    p.write_text(text)
    H = codes.load_alist(p)
    assert np.array_equal(H, np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8))


def test_alist_malformed_rejected(tmp_path):
    p = tmp_path / 'bad.alist'
    p.write_text('3 2\n2 2\n1 2 1\n2 2\n1\n1 2\n2\n1 2\n2\n')  # truncated
    with pytest.raises(ValueError):
        codes.load_alist(p)
    # adjacency mismatch between column and row lists
    p.write_text('2 1\n1 1\n1 1\n1\n1\n1\n1\n')
    with pytest.raises(ValueError):
        codes.load_alist(p)


def test_load_alist_rejects_out_of_range(tmp_path):
    p = tmp_path / 'oob.alist'
    p.write_text('2 1\n1 2\n1 1\n2\n1\n5\n1 2\n')
    with pytest.raises(ValueError):
        codes.load_alist(p)
