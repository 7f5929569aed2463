'''
Row-wise denoisers for the decoupled channel s = x + g, g ~ N(0, Sigma).

Three families, in increasing blocklength ambition:
  * bayes_denoise: exact posterior mean over the full codebook, O(2^k d^2)
    per row, for short codes only. Hard decisions by codeword MAP.
  * marginal_denoise: coordinatewise posterior mean ignoring the code,
    sqrt(E) tanh(sqrt(E) s_j / Sigma_jj).
  * bp_denoise: a fixed number of flooding message-passing rounds on the
    code's Tanner graph, reducing to the marginal denoiser at zero rounds.

bp_jacobian_diag/full give the derivative of the BP output used by the
iterative decoder's correction term: the diagonal is (E - eta_j^2)/Sigma_jj,
and off-diagonal entries follow the unique short path between the two
variables when the round count stays below the graph girth, as a product of
per-check-hop factors.

All message-passing arithmetic clamps messages to +-L_MAX and arctanh
arguments to +-(1 - 1e-12), and the Bayes weights subtract the max exponent,
so none of these functions overflow for inputs up to ||s|| ~ 1e6.
'''

import math
from dataclasses import dataclass

import numpy as np

from .codes import enumerate_codebook, girth, satisfies_checks, tanner_graph

L_MAX = 30.0
ATANH_CLAMP = 1.0 - 1e-12
_COV_FLOOR = 1e-9


# ------------------------------------------------------------- covariance

@dataclass
class EffectiveNoiseCov:
    '''
    Effective noise covariance of the decoupled channel, either a full d x d
    matrix or a diagonal. Diagonal entries are floored at 1e-9 for use in
    divisions; singular full matrices get a tiny jitter before linear solves
    and raise if that is not enough.
    '''
    diag: np.ndarray
    full: np.ndarray = None

    @classmethod
    def wrap(cls, cov):
        if isinstance(cov, cls):
            return cov
        cov = np.asarray(cov, dtype=np.float64)
        if cov.ndim == 1:
            return cls(diag=np.maximum(cov, _COV_FLOOR))
        assert cov.ndim == 2 and cov.shape[0] == cov.shape[1]
        return cls(diag=np.maximum(np.diag(cov), _COV_FLOOR), full=cov)

    @property
    def is_diag(self):
        return self.full is None

    @property
    def d(self):
        return self.diag.size

    def matrix(self):
        return np.diag(self.diag) if self.full is None else self.full

    def solve(self, B):
        '''Sigma^{-1} B with escalating jitter on singular matrices.'''
        if self.full is None:
            return B / self.diag[:, None] if B.ndim == 2 else B / self.diag
        L = self.chol()
        y = np.linalg.solve(L, B)
        return np.linalg.solve(L.T, y)

    def chol(self):
        '''Lower-triangular factor for sampling; jittered when not PD.'''
        if self.full is None:
            return np.diag(np.sqrt(self.diag))
        M = self.full
        jitter = 1e-10 * max(float(np.mean(self.diag)), _COV_FLOOR)
        for _ in range(4):
            try:
                L = np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                L = None
            if L is not None and np.isfinite(L).all():
                return L
            M = M + jitter * np.eye(self.d)
            jitter *= 100.0
        raise ValueError('effective noise covariance is singular beyond repair')


def _rows(s):
    s = np.asarray(s, dtype=np.float64)
    return (s[None, :], True) if s.ndim == 1 else (s, False)


# ------------------------------------------------------------------- bayes

def _bayes_logits(s, cov, book):
    C = EffectiveNoiseCov.wrap(cov)
    B = C.solve(book.words.T)                                   # (d, M)
    quad = -0.5 * np.einsum('md,dm->m', book.words, B)
    return s @ B + quad[None, :]


def _bayes_weights(s, cov, book):
    logits = _bayes_logits(s, cov, book)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    return w


def bayes_denoise(s, cov, book):
    '''
    Posterior mean of the transmitted word given s = x + g, g ~ N(0, cov),
    x uniform on the codebook. s is (d,) or (N, d); output matches.
    '''
    s2, single = _rows(s)
    eta = _bayes_weights(s2, cov, book) @ book.words
    return eta[0] if single else eta


def bayes_jacobian_sum(s, cov, book, mode='diag'):
    '''
    Sum over rows of the derivative of bayes_denoise: sum_l Cov_post(x|s_l)
    Sigma^{-1}. mode 'diag' returns its diagonal as a vector, 'full' the
    d x d matrix.
    '''
    s2, _ = _rows(s)
    C = EffectiveNoiseCov.wrap(cov)
    w = _bayes_weights(s2, C, book)
    eta = w @ book.words
    colsum = w.sum(axis=0)
    sxx = (book.words * colsum[:, None]).T @ book.words
    cov_sum = sxx - eta.T @ eta
    J = C.solve(cov_sum).T      # cov_sum Sigma^{-1}, using symmetry of both
    return np.diag(J).copy() if mode == 'diag' else J


def map_hard_decision(s, cov, book):
    '''
    Most likely codeword per row, as +-sqrt(E) symbols. Ties pick the word
    whose bit pattern is lexicographically smallest (bit 0, +sqrt(E), first).
    '''
    s2, single = _rows(s)
    logits = _bayes_logits(s2, cov, book)
    order = np.lexsort(book.bits.T[::-1])      # coordinate 0 is primary key
    pick = order[np.argmax(logits[:, order], axis=1)]
    out = book.words[pick]
    return out[0] if single else out


# ---------------------------------------------------------------- marginal

def marginal_denoise(s, cov_diag, E):
    '''Coordinatewise posterior mean for x_j = +-sqrt(E) ignoring the code.'''
    s2, single = _rows(s)
    diag = EffectiveNoiseCov.wrap(cov_diag).diag
    eta = np.sqrt(E) * np.tanh(np.sqrt(E) * s2 / diag)
    return eta[0] if single else eta


def marginal_jacobian_diag(s, cov_diag, E):
    '''d/ds_j of marginal_denoise, equal to (E - eta_j^2) / Sigma_jj.'''
    s2, single = _rows(s)
    diag = EffectiveNoiseCov.wrap(cov_diag).diag
    eta = marginal_denoise(s2, cov_diag, E)
    J = (E - eta ** 2) / diag
    return J[0] if single else J


def sign_hard_decision(v, E):
    '''Coordinatewise sign quantization to +-sqrt(E); ties go to +sqrt(E).'''
    v = np.asarray(v)
    return np.where(v >= 0, math.sqrt(E), -math.sqrt(E))


# ---------------------------------------------------------------------- bp

@dataclass
class BpWorkspace:
    '''Message state after a bp_denoise call (final round).'''
    llr: np.ndarray            # (N, d) final beliefs
    v2c: np.ndarray            # (N, E) variable-to-check messages
    c2v: np.ndarray            # (N, E) check-to-variable messages, None if rounds=0
    rounds: int
    v2c_rounds: list = None    # [v2c^(0) .. v2c^(rounds-1)] when history kept


def _check_messages(v2c, graph):
    '''One flooding check update with exclusion products, clamped.'''
    t = np.tanh(0.5 * v2c)
    T = t[:, graph.check_edges]
    T[:, ~graph.check_mask] = 1.0
    pre = np.cumprod(T, axis=2)
    suf = np.cumprod(T[:, :, ::-1], axis=2)[:, :, ::-1]
    excl = np.ones_like(T)
    excl[:, :, 1:] *= pre[:, :, :-1]
    excl[:, :, :-1] *= suf[:, :, 1:]
    arg = np.clip(excl, -ATANH_CLAMP, ATANH_CLAMP)
    c2v_pad = 2.0 * np.arctanh(arg)
    c2v = np.empty_like(v2c)
    c2v[:, graph.check_edges[graph.check_mask]] = c2v_pad[:, graph.check_mask]
    return np.clip(c2v, -L_MAX, L_MAX)


def _var_totals(c2v, graph):
    '''Per-variable sum of incoming check messages.'''
    Cp = c2v[:, graph.var_edges]
    Cp[:, ~graph.var_mask] = 0.0
    return Cp.sum(axis=2)


def _bp_run(s2, diag, graph, rounds, E, keep_history=False):
    '''Flooding BP; returns (llr, v2c, c2v, history).'''
    half = np.sqrt(E) * s2 / diag
    Lch = 2.0 * half
    v2c = np.clip(Lch[:, graph.edge_var], -L_MAX, L_MAX)
    history = [v2c.copy()] if keep_history else None
    c2v = None
    llr = Lch.copy()
    for r in range(1, rounds + 1):
        c2v = _check_messages(v2c, graph)
        tot = _var_totals(c2v, graph)
        llr = Lch + tot
        if r < rounds:
            v2c = np.clip(llr[:, graph.edge_var] - c2v, -L_MAX, L_MAX)
            if keep_history:
                history.append(v2c.copy())
    return llr, v2c, c2v, history


def bp_denoise(s, cov_diag, graph, rounds, E, keep_history=False):
    '''
    BP denoiser: "rounds" flooding iterations seeded with channel beliefs
    2 sqrt(E) s_j / Sigma_jj, output sqrt(E) tanh(L_j / 2) from the final
    beliefs. rounds = 0 returns exactly marginal_denoise(s, cov_diag, E).
    Returns (eta, BpWorkspace).
    '''
    assert rounds >= 0
    s2, single = _rows(s)
    diag = EffectiveNoiseCov.wrap(cov_diag).diag
    llr, v2c, c2v, hist = _bp_run(s2, diag, graph, rounds, E, keep_history)
    eta = np.sqrt(E) * np.tanh(0.5 * llr)
    ws = BpWorkspace(llr=llr, v2c=v2c, c2v=c2v, rounds=rounds, v2c_rounds=hist)
    return (eta[0] if single else eta), ws


def bp_jacobian_diag(s, cov_diag, graph, rounds, E):
    '''Diagonal of the BP output derivative: (E - eta_j^2) / Sigma_jj.'''
    s2, single = _rows(s)
    diag = EffectiveNoiseCov.wrap(cov_diag).diag
    eta, _ = bp_denoise(s2, cov_diag, graph, rounds, E)
    J = (E - eta ** 2) / diag
    return J[0] if single else J


def bp_jacobian_full(s, cov_diag, graph, rounds, E):
    '''
    Full d x d derivative of the BP output at a single input row: entry
    (j, j1) follows one shortest alternating path j1 -> i_1 -> ... -> i_r -> j
    of r <= rounds check hops, multiplying one derivative factor per check
    hop, and is zero when no such path exists. The diagonal is the
    direct-channel term (E - eta_j^2) / Sigma_jj.

    Raises unless rounds < girth(graph). On cycle-free graphs the result
    matches finite differences at every round count. On cyclic graphs it is
    a single-path approximation: finite differences pick up additional terms
    once 4 * rounds >= girth (a second path between distinct variables) or
    2 * rounds >= girth (a cyclic self-path inflating the diagonal), even
    though rounds < girth. Messages near the clamps also break the formula;
    keep inputs moderate when validating.
    '''
    s = np.asarray(s, dtype=np.float64)
    assert s.ndim == 1, 'full jacobian is a per-row quantity'
    g = girth(graph)
    if not rounds < g:
        raise ValueError(f'round count {rounds} must stay below the graph girth {g}')
    diag = EffectiveNoiseCov.wrap(cov_diag).diag
    llr, _, _, hist = _bp_run(s[None, :], diag, graph, rounds, E, keep_history=True)
    eta = np.sqrt(E) * np.tanh(0.5 * llr[0])
    d = graph.d
    D = np.zeros((d, d))
    D[np.arange(d), np.arange(d)] = (E - eta ** 2) / diag
    tanh_hist = [np.tanh(0.5 * h[0]) for h in hist]

    for j1 in range(d):
        for path in _var_paths(graph, j1, rounds):
            j = path[-1]
            r = len(path) // 2
            factor = 1.0
            for m in range(1, r + 1):
                th = tanh_hist[rounds - r + m - 1]
                i_m, v_prev, v_next = path[2 * m - 1], path[2 * m - 2], path[2 * m]
                u = th[graph.edge_id(i_m, v_prev)]
                c = 1.0
                for jt in graph.check_neighbors(i_m):
                    if jt != v_prev and jt != v_next:
                        c *= th[graph.edge_id(i_m, jt)]
                factor *= c * (1.0 - u ** 2) / (1.0 - (c * u) ** 2)
            D[j, j1] += (E - eta[j] ** 2) / diag[j1] * factor
    return D


def _var_paths(graph, j1, max_hops):
    '''
    Yield simple alternating paths [j1, i_1, j_2, ..., i_r, j_end] from
    variable j1, one per reachable variable, up to max_hops check hops (BFS,
    so each path is shortest; unique below girth).
    '''
    seen = {j1}
    frontier = [[j1]]
    for _ in range(max_hops):
        nxt = []
        for path in frontier:
            v = path[-1]
            prev_check = path[-2] if len(path) > 1 else -1
            for i in graph.var_neighbors(v):
                if i == prev_check:
                    continue
                for j2 in graph.check_neighbors(i):
                    if j2 in seen:
                        continue
                    seen.add(j2)
                    newp = path + [int(i), int(j2)]
                    nxt.append(newp)
                    yield newp
        frontier = nxt


def post_bp_decode(s, cov_diag, graph, E, max_rounds=200):
    '''
    Standalone BP decode of each row, run to parity satisfaction or
    max_rounds (early per-row stop). Returns (bits, converged) where bits is
    (N, d) in {0,1} and converged marks rows whose checks all pass.
    '''
    s2, single = _rows(s)
    diag = EffectiveNoiseCov.wrap(cov_diag).diag
    N = s2.shape[0]
    Lch = 2.0 * (np.sqrt(E) * s2 / diag)
    llr = Lch.copy()
    v2c = np.clip(Lch[:, graph.edge_var], -L_MAX, L_MAX)
    bits = (llr < 0).astype(np.uint8)
    done = satisfies_checks(graph.H, bits)
    for _ in range(max_rounds):
        act = ~done
        if not act.any():
            break
        c2v = _check_messages(v2c[act], graph)
        tot = _var_totals(c2v, graph)
        llr_act = Lch[act] + tot
        v2c[act] = np.clip(llr_act[:, graph.edge_var] - c2v, -L_MAX, L_MAX)
        bits_act = (llr_act < 0).astype(np.uint8)
        bits[act] = bits_act
        idx = np.nonzero(act)[0]
        done[idx] = satisfies_checks(graph.H, bits_act)
    if single:
        return bits[0], bool(done[0])
    return bits, done


# ---------------------------------------------------------------- adapters

class BayesDenoiser:
    '''Codebook posterior mean with MAP hard decisions; tracks full covariance.'''
    name = 'bayes'
    cov_mode = 'full'

    def __init__(self, code, E):
        self.book = enumerate_codebook(code, E)
        self.E = float(E)

    def denoise(self, S, cov):
        return bayes_denoise(S, cov, self.book)

    def denoise_with_jac(self, S, cov, jac_mode='diag'):
        C = EffectiveNoiseCov.wrap(cov)
        return bayes_denoise(S, C, self.book), bayes_jacobian_sum(S, C, self.book, jac_mode)

    def hard(self, S, cov):
        return map_hard_decision(S, cov, self.book)


class MarginalDenoiser:
    '''Coordinatewise tanh denoiser with sign hard decisions.'''
    name = 'marginal'
    cov_mode = 'diag'

    def __init__(self, code, E):
        self.E = float(E)

    def denoise(self, S, cov):
        return marginal_denoise(S, cov, self.E)

    def denoise_with_jac(self, S, cov, jac_mode='diag'):
        diag = EffectiveNoiseCov.wrap(cov).diag
        eta = marginal_denoise(S, diag, self.E)
        J = ((self.E - eta ** 2) / diag).sum(axis=0)
        return eta, (np.diag(J) if jac_mode == 'full' else J)

    def hard(self, S, cov):
        return sign_hard_decision(S, self.E)


class BpDenoiser:
    '''Tanner-graph message passing denoiser; hard decisions by belief sign.'''
    name = 'bp'
    cov_mode = 'diag'

    def __init__(self, code, E, rounds=5):
        self.graph = tanner_graph(code.H)
        self.E = float(E)
        self.rounds = int(rounds)

    def denoise(self, S, cov):
        return bp_denoise(S, cov, self.graph, self.rounds, self.E)[0]

    def denoise_with_jac(self, S, cov, jac_mode='diag'):
        diag = EffectiveNoiseCov.wrap(cov).diag
        eta, _ = bp_denoise(S, diag, self.graph, self.rounds, self.E)
        if jac_mode == 'full':
            S2, _ = _rows(S)
            J = np.zeros((S2.shape[1], S2.shape[1]))
            for row in S2:
                J += bp_jacobian_full(row, diag, self.graph, self.rounds, self.E)
            return eta, J
        J = ((self.E - eta ** 2) / diag).sum(axis=0)
        return eta, J

    def hard(self, S, cov):
        _, ws = bp_denoise(S, cov, self.graph, self.rounds, self.E)
        return sign_hard_decision(ws.llr, self.E)


def make_denoiser(kind, code, E, bp_rounds=5):
    if kind == 'bayes':
        return BayesDenoiser(code, E)
    if kind == 'marginal':
        return MarginalDenoiser(code, E)
    if kind == 'bp':
        return BpDenoiser(code, E, rounds=bp_rounds)
    raise ValueError(f'unknown denoiser kind {kind!r}')
