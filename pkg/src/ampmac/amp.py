'''
Iterative decoders for Y = A X + noise with row-wise denoising.

The iid-design decoder alternates a residual step with a memory (correction)
term, a matched filter S = X + A^T Z, and a denoiser applied to the rows of
S. The effective noise covariance fed to the denoiser is the theoretical
initialization at t = 0 and the empirical residual covariance afterwards.
The correction term uses the sum over rows of the denoiser derivative; by
default only its diagonal (adequate in practice and far cheaper), optionally
the full matrix for small d.

The spatially coupled variant tracks one residual covariance per row block
and one effective observation covariance per column block, with the
correction and matched filter reweighted per block pair. A 1 x 1 base
matrix reproduces the iid decoder up to floating-point roundoff; the two
paths stay deliberately separate so they can be checked against each other.
'''

import math
from dataclasses import dataclass, field

import numpy as np

from .denoisers import EffectiveNoiseCov


@dataclass
class AmpOptions:
    max_iter: int = 300
    tol: float = 1e-6            # relative change of the covariance diagonal
    jac_mode: str = 'diag'       # 'diag' or 'full' correction term
    dtype: object = None         # work dtype for the big matmuls (None: keep A's)
    record_states: bool = False  # keep per-iteration X (small systems only)


@dataclass
class AmpResult:
    X_soft: np.ndarray
    X_hard: np.ndarray
    S: np.ndarray
    cov: object                    # final covariance: array, or list per block
    iterations: int
    converged: bool
    failure: str = None
    cov_diag_history: list = field(default_factory=list)
    X_history: list = field(default_factory=list)

    @property
    def ok(self):
        return self.failure is None


def estimate_cov(Z, mode='full'):
    '''
    Residual-based covariance estimate Z^T Z / nt (or its diagonal). The
    full matrix's diagonal is overwritten with the same fixed-order sum the
    diag mode uses, so both modes agree exactly. Meaningful from the first
    residual after a denoising step (t >= 1).
    '''
    Z64 = Z.astype(np.float64, copy=False)
    nt = Z64.shape[0]
    diag = np.einsum('ij,ij->j', Z64, Z64) / nt
    if mode == 'diag':
        return diag
    full = Z64.T @ Z64 / nt
    np.fill_diagonal(full, diag)
    return full


def measure_error(X_hat, X_true):
    '''(user error rate, bit error rate) between +-sqrt(E) row matrices.'''
    wrong = (X_hat < 0) != (X_true < 0)
    return float(wrong.any(axis=1).mean()), float(wrong.mean())


def _rel_diag_change(diag, diag_prev):
    return float(np.max(np.abs(diag - diag_prev) / np.maximum(diag_prev, 1e-30)))


def _cov_diag(cov):
    return np.diag(cov) if np.ndim(cov) == 2 else np.asarray(cov)


def amp_step_iid(Y, A, X, Z_prev, J_prev):
    '''
    One residual + matched filter step: Z = Y - A X + correction, S = X + A^T Z.
    J_prev is the row-summed denoiser derivative from the previous iteration,
    either a (d,) diagonal or a (d, d) matrix; None means no correction
    (first step). Returns (Z, S).
    '''
    nt = A.shape[0]
    Z = Y - A @ X
    if J_prev is not None:
        J = np.asarray(J_prev)
        if J.ndim == 1:
            Z += Z_prev * (J / nt).astype(Z_prev.dtype, copy=False)
        else:
            Z += Z_prev @ (J.T / nt).astype(Z_prev.dtype, copy=False)
    S = X + A.T @ Z
    return Z, S


def run_amp_iid(Y, A, params, denoiser, opts=None):
    '''
    Full decode loop for an iid design. Stops when the relative change of
    the estimated covariance diagonal drops below opts.tol, on non-finite
    iterates (failure recorded, last finite state returned), or at
    opts.max_iter. Deterministic given (Y, A).
    '''
    opts = opts or AmpOptions()
    if not np.isfinite(Y).all():
        raise ValueError('Y contains non-finite entries')
    dtype = np.dtype(opts.dtype) if opts.dtype is not None else A.dtype
    Aw = A.astype(dtype, copy=False)
    Yw = Y.astype(dtype, copy=False)
    L, d = A.shape[1], params.d
    X = np.zeros((L, d), dtype=dtype)
    Z_prev = None
    J_prev = None
    diag_prev = None
    S = X_soft = None
    cov = None
    converged = False
    failure = None
    history = []
    xhist = []
    t = 0
    for t in range(opts.max_iter):
        Z, S_work = amp_step_iid(Yw, Aw, X, Z_prev, J_prev)
        if not np.isfinite(Z).all():
            failure = f'non-finite residual at iteration {t}'
            break
        if t == 0:
            var0 = params.sigma2 + d * params.mu * params.E
            cov = np.full(d, var0) if denoiser.cov_mode == 'diag' else var0 * np.eye(d)
        else:
            cov = estimate_cov(Z, mode=denoiser.cov_mode)
        S = S_work.astype(np.float64, copy=False)
        X_soft, J_prev = denoiser.denoise_with_jac(S, cov, jac_mode=opts.jac_mode)
        if not np.isfinite(X_soft).all():
            failure = f'non-finite denoiser output at iteration {t}'
            break
        X = X_soft.astype(dtype, copy=False)
        Z_prev = Z
        diag = _cov_diag(cov)
        history.append(diag.copy())
        if opts.record_states:
            xhist.append(X_soft.copy())
        if diag_prev is not None and _rel_diag_change(diag, diag_prev) < opts.tol:
            converged = True
            t += 1
            break
        diag_prev = diag
    else:
        t = opts.max_iter
    if S is None:
        raise RuntimeError(f'decoder produced no usable iterate: {failure}')
    X_hard = denoiser.hard(S, cov)
    return AmpResult(X_soft=X_soft, X_hard=X_hard, S=S, cov=cov, iterations=t,
                     converged=converged, failure=failure,
                     cov_diag_history=history, X_history=xhist)


# ----------------------------------------------------------------- coupled

def _inv_block(M):
    return 1.0 / M if M.ndim == 1 else np.linalg.inv(M)


def _harmonic_T(W, Phi_inv, c):
    '''T_c = [sum_r W[r,c] Phi_r^{-1}]^{-1} over the nonzero rows.'''
    rows = np.nonzero(W[:, c])[0]
    acc = sum(W[r, c] * Phi_inv[r] for r in rows)
    return _inv_block(acc) if acc.ndim == 1 else np.linalg.inv(acc)


def _sc_matched_filter(Aw, Z, X, W, Q, nR, LC, diag_mode):
    '''S = X + per-block-pair reweighted A^T Z.'''
    S = X.astype(np.float64).copy()
    for c in range(W.shape[1]):
        sl = slice(c * LC, (c + 1) * LC)
        for r in np.nonzero(W[:, c])[0]:
            Zr = Z[r * nR:(r + 1) * nR]
            blk = (Aw[r * nR:(r + 1) * nR, sl].T @ Zr).astype(np.float64, copy=False)
            S[sl] += blk * Q[r][c] if diag_mode else blk @ Q[r][c]
    return S


def _memory_weight(Q_rc, J_c):
    '''Q_rc applied to the (transposed, normalized) derivative sum J_c.
    Either factor may be a diagonal stored as a vector.'''
    if Q_rc.ndim == 1 and J_c.ndim == 1:
        return Q_rc * J_c
    if Q_rc.ndim == 1:
        return Q_rc[:, None] * J_c
    if J_c.ndim == 1:
        return Q_rc * J_c[None, :]
    return Q_rc @ J_c


def sc_amp_step(Yw, Aw, design, X, Z_prev, Q_prev, Jc_prev, params, diag_mode):
    '''
    One spatially coupled step: residual with per-row-block memory term,
    block covariance estimates, and the reweighted matched filter. Returns
    (Z, S, Phi, T, Q) where Phi/T/Q are per-block lists, diag vectors when
    diag_mode else full matrices.
    '''
    W = design.base.W
    R, C = W.shape
    nR, LC = design.nR, design.LC
    d = params.d

    Z = Yw - Aw @ X
    if Jc_prev is not None:
        for r in range(R):
            M = None
            for c in np.nonzero(W[r])[0]:
                term = W[r, c] * _memory_weight(Q_prev[r][c], Jc_prev[c])
                M = term if M is None else M + term
            M = (d * params.mu_in * M).astype(Z.dtype, copy=False)
            Zr = Z_prev[r * nR:(r + 1) * nR]
            Z[r * nR:(r + 1) * nR] += Zr * M if M.ndim == 1 else Zr @ M

    mode = 'diag' if diag_mode else 'full'
    Phi = [estimate_cov(Z[r * nR:(r + 1) * nR], mode=mode) for r in range(R)]
    Phi_inv = [_inv_block(P) for P in Phi]
    T = [_harmonic_T(W, Phi_inv, c) for c in range(C)]
    Q = [[None] * C for _ in range(R)]
    for r in range(R):
        for c in np.nonzero(W[r])[0]:
            Q[r][c] = Phi_inv[r] * T[c] if diag_mode else Phi_inv[r] @ T[c]

    S = _sc_matched_filter(Aw, Z, X, W, Q, nR, LC, diag_mode)
    return Z, S, Phi, T, Q


def run_amp_sc(Y, design, params, denoiser, opts=None):
    '''
    Decode loop for a coupled design. Mirrors run_amp_iid with per-block
    covariances; at t = 0 the block covariances take their theoretical
    values instead of residual estimates. Defaults to a higher iteration
    cap since the decoding wave needs time to cross the blocks.
    '''
    opts = opts or AmpOptions(max_iter=500)
    if not np.isfinite(Y).all():
        raise ValueError('Y contains non-finite entries')
    W = design.base.W
    R, C = W.shape
    nR, LC = design.nR, design.LC
    d = params.d
    dtype = np.dtype(opts.dtype) if opts.dtype is not None else design.A.dtype
    Aw = design.A.astype(dtype, copy=False)
    Yw = Y.astype(dtype, copy=False)
    L = design.L
    diag_mode = denoiser.cov_mode == 'diag'

    X = np.zeros((L, d), dtype=dtype)
    Z_prev = None
    Q_prev = None
    Jc_prev = None
    diag_prev = None
    converged = False
    failure = None
    history = []
    xhist = []
    S = X_soft = T = None
    t = 0
    for t in range(opts.max_iter):
        if t == 0:
            Z = Yw.copy()
            rowsum = W.sum(axis=1)
            if diag_mode:
                Phi = [np.full(d, params.sigma2 + d * params.mu_in * params.E * rowsum[r])
                       for r in range(R)]
            else:
                Phi = [(params.sigma2 + d * params.mu_in * params.E * rowsum[r]) * np.eye(d)
                       for r in range(R)]
            Phi_inv = [_inv_block(P) for P in Phi]
            T = [_harmonic_T(W, Phi_inv, c) for c in range(C)]
            Q = [[None] * C for _ in range(R)]
            for r in range(R):
                for c in np.nonzero(W[r])[0]:
                    Q[r][c] = Phi_inv[r] * T[c] if diag_mode else Phi_inv[r] @ T[c]
            S = _sc_matched_filter(Aw, Z, X, W, Q, nR, LC, diag_mode)
        else:
            Z, S, Phi, T, Q = sc_amp_step(Yw, Aw, design, X, Z_prev, Q_prev,
                                          Jc_prev, params, diag_mode)
        if not np.isfinite(Z).all() or not np.isfinite(S).all():
            failure = f'non-finite iterate at iteration {t}'
            break
        X_soft = np.empty((L, d))
        Jc = [None] * C
        for c in range(C):
            sl = slice(c * LC, (c + 1) * LC)
            eta, Jsum = denoiser.denoise_with_jac(S[sl], T[c], jac_mode=opts.jac_mode)
            X_soft[sl] = eta
            Jc[c] = Jsum / LC if Jsum.ndim == 1 else Jsum.T / LC
        if not np.isfinite(X_soft).all():
            failure = f'non-finite denoiser output at iteration {t}'
            break
        X = X_soft.astype(dtype, copy=False)
        Z_prev, Q_prev, Jc_prev = Z, Q, Jc
        diag = np.concatenate([_cov_diag(Tc) for Tc in T])
        history.append(diag.copy())
        if opts.record_states:
            xhist.append(X_soft.copy())
        if diag_prev is not None and _rel_diag_change(diag, diag_prev) < opts.tol:
            converged = True
            t += 1
            break
        diag_prev = diag
    else:
        t = opts.max_iter
    if S is None:
        raise RuntimeError(f'decoder produced no usable iterate: {failure}')
    X_hard = np.empty((L, d))
    for c in range(C):
        sl = slice(c * LC, (c + 1) * LC)
        X_hard[sl] = denoiser.hard(S[sl], T[c])
    return AmpResult(X_soft=X_soft, X_hard=X_hard, S=S, cov=T, iterations=t,
                     converged=converged, failure=failure,
                     cov_diag_history=history, X_history=xhist)


def run_amp(instance, denoiser, opts=None):
    '''Dispatch on the instance's design: iid base runs the iid decoder.'''
    if instance.design.base.is_iid:
        return run_amp_iid(instance.Y, instance.design.A, instance.params, denoiser, opts)
    return run_amp_sc(instance.Y, instance.design, instance.params, denoiser, opts)
