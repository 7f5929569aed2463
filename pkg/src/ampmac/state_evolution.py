'''
State evolution: scalar-channel recursions that predict the decoder's
per-iteration effective noise covariance and error rates without running
it. Each iteration replaces the decoder's matched-filter output by the
surrogate x_bar + g with g Gaussian, measures the denoiser's mean squared
error by Monte Carlo, and maps it back to the next covariance. Since every
user transmits a codeword and the statistics are symmetric across
codewords, the all-zero message (all +sqrt(E) signs) stands in for all of
them.

The iid recursion tracks one covariance; the coupled recursion tracks one
per row block and column block, which is what lets the decoding wave show
up block by block. A 1 x 1 base reduces to the iid recursion; the two are
kept separate and checked against each other in tests.

Monte Carlo draws come from per-(iteration, block, chunk) substreams, so
results are reproducible for a given seed and independent of chunk size
ordering concerns within an iteration.
'''

import math
from dataclasses import dataclass, field

import numpy as np

from .amp import _harmonic_T, _inv_block
from .denoisers import EffectiveNoiseCov, post_bp_decode
from .rng import stream

_CHUNK = 8192


@dataclass
class SeOptions:
    mc: int = None          # None: pick by dimension / denoiser (default_mc)
    max_iter: int = 200
    tol: float = None       # absolute tolerance on the covariance diagonal;
                            # None: 1e-6 * sigma2 (1e-3 * sigma2 for large-d bp)
    seed: int = 0
    chunk: int = _CHUNK
    record_errors: bool = False   # predict per-iteration error rates too
    mc_err: int = None            # sample count for error prediction
    stall_window: int = 8   # stop early when the mean diagonal has not
                            # improved by stall_rtol over this many
                            # iterations (None disables); with fresh draws
                            # each iteration the strict tolerance is only
                            # reachable once the error floor is hit, so
                            # high noisy fixed points would otherwise
                            # always run to max_iter
    stall_rtol: float = 1e-3


@dataclass
class ErrorEstimate:
    uer: float
    ber: float
    mc: int


@dataclass
class SeResult:
    cov: object                   # final covariance, (d,) or (d, d)
    iterations: int
    converged: bool
    stalled: bool = False
    trajectory: list = field(default_factory=list)   # diag per iteration
    errors: list = field(default_factory=list)       # ErrorEstimate per iteration


@dataclass
class ScSeResult:
    Psi: list = None
    T: list = None                # final per-column-block covariances
    Phi: list = None
    iterations: int = 0
    converged: bool = False
    stalled: bool = False
    trajectory: list = field(default_factory=list)   # (C, d) diag per iteration
    errors: list = field(default_factory=list)       # list of per-block estimates


def _is_stalled(means, window, rtol):
    '''True when the running minimum stopped improving a window ago.'''
    if window is None or len(means) < 2 * window:
        return False
    recent = min(means[-window:])
    prior = min(means[:-window])
    return recent > prior * (1.0 - rtol)


def default_mc(d, denoiser_name):
    '''Sample count heuristic: long graph codes are costly per sample.'''
    if denoiser_name == 'bp' and d > 64:
        return 2000
    return max(10000, 50 * d)


def _default_tol(sigma2, d, denoiser_name, mc):
    if denoiser_name == 'bp' and d > 64:
        return 1e-3 * sigma2
    return 1e-6 * sigma2


def _chol_factor(cov):
    '''Lower-triangular factor for sampling N(0, cov); vector in, sqrt out.'''
    if np.ndim(cov) == 1:
        return np.sqrt(np.asarray(cov))
    return EffectiveNoiseCov.wrap(cov).chol()


def _draw(gen, m, d, factor):
    z = gen.standard_normal((m, d))
    if factor.ndim == 1:
        return z * factor
    return z @ factor.T


def _floor_psd(M):
    '''Symmetrize and clip negative eigenvalues to zero.'''
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    if w[0] >= 0:
        return M
    return (V * np.clip(w, 0.0, None)) @ V.T


def _signals(gen, m, d, E, denoiser):
    '''
    Signal rows for the surrogate channel. With a diagonal covariance the
    per-coordinate sign-flip symmetry (flip patterns are codewords) makes
    every codeword equivalent, so the all-plus row stands in for all of
    them. With a full covariance that shortcut is only exact coordinatewise:
    conditioning on one codeword correlates the deviations of all
    coordinates through the common signal, which a literal fixed-signal
    average mistakes for noise correlation (rank-one, near E per entry at
    low SNR) and the recursion blows up. So full mode draws the transmitted
    codeword uniformly from the denoiser's codebook.
    '''
    if denoiser.cov_mode == 'diag':
        return np.sqrt(E) * np.ones((1, d))
    words = denoiser.book.words
    return words[gen.integers(0, words.shape[0], m)]


def _mse_mc(cov, denoiser, E, mc, seed, path, chunk):
    '''
    Monte Carlo E[(eta(x + g) - x)(...)^T], g ~ N(0, cov), x the transmitted
    row (see _signals). Diagonal covariance in means a diagonal (vector)
    estimate out; full in means a symmetrized PSD matrix out. Fixed chunk
    order, one substream per (path, chunk).
    '''
    diag_mode = np.ndim(cov) == 1
    d = cov.shape[0]
    factor = _chol_factor(cov)
    acc = np.zeros(d) if diag_mode else np.zeros((d, d))
    done = 0
    ci = 0
    while done < mc:
        m = min(chunk, mc - done)
        gen = stream(seed, 'se', *path, ci)
        x = _signals(gen, m, d, E, denoiser)
        g = _draw(gen, m, d, factor)
        dev = denoiser.denoise(x + g, cov) - x
        if diag_mode:
            acc += np.einsum('ij,ij->j', dev, dev)
        else:
            acc += dev.T @ dev
        done += m
        ci += 1
    mse = acc / mc
    return mse if diag_mode else _floor_psd(mse)


def _hard_error_mc(cov, denoiser, E, mc, seed, path, chunk, post_bp_rounds=None):
    '''Monte Carlo error rates of the hard decision rule at covariance cov.'''
    d = cov.shape[0]
    factor = _chol_factor(cov)
    user_err = 0
    bit_err = 0
    done = 0
    ci = 0
    while done < mc:
        m = min(chunk, mc - done)
        gen = stream(seed, 'err', *path, ci)
        x = _signals(gen, m, d, E, denoiser)
        s = x + _draw(gen, m, d, factor)
        if post_bp_rounds is not None:
            diag = EffectiveNoiseCov.wrap(cov).diag
            bits, _ = post_bp_decode(s, diag, denoiser.graph, E,
                                     max_rounds=post_bp_rounds)
            wrong = bits != (x < 0)
        else:
            wrong = (denoiser.hard(s, cov) < 0) != (x < 0)
        user_err += int(wrong.any(axis=1).sum())
        bit_err += int(wrong.sum())
        done += m
        ci += 1
    return ErrorEstimate(uer=user_err / mc, ber=bit_err / (mc * d), mc=mc)


# --------------------------------------------------------------------- iid

def initial_cov_iid(params, cov_mode):
    var0 = params.sigma2 + params.d * params.mu * params.E
    if cov_mode == 'diag':
        return np.full(params.d, var0)
    return var0 * np.eye(params.d)


def se_step_iid(cov, params, denoiser, mc, seed, t, chunk=_CHUNK):
    '''One recursion step: next covariance from the current one.'''
    mse = _mse_mc(cov, denoiser, params.E, mc, seed, (t, 0), chunk)
    if np.ndim(cov) == 1:
        return params.sigma2 + params.d * params.mu * mse
    return params.sigma2 * np.eye(params.d) + params.d * params.mu * mse


def se_run_iid(params, denoiser, opts=None):
    '''
    Iterate the recursion from the theoretical initialization until the
    covariance diagonal moves less than tol (absolute) or max_iter.
    '''
    opts = opts or SeOptions()
    mc = opts.mc or default_mc(params.d, denoiser.name)
    tol = opts.tol if opts.tol is not None else _default_tol(
        params.sigma2, params.d, denoiser.name, mc)
    cov = initial_cov_iid(params, denoiser.cov_mode)
    diag = cov if cov.ndim == 1 else np.diag(cov).copy()
    traj = [np.asarray(diag).copy()]
    errors = []
    mc_err = opts.mc_err or mc
    if opts.record_errors:
        errors.append(_hard_error_mc(cov, denoiser, params.E, mc_err,
                                     opts.seed, (0, 0), opts.chunk))
    converged = False
    stalled = False
    means = [float(np.mean(diag))]
    for t in range(1, opts.max_iter + 1):
        cov = se_step_iid(cov, params, denoiser, mc, opts.seed, t - 1, opts.chunk)
        new_diag = cov if cov.ndim == 1 else np.diag(cov).copy()
        traj.append(np.asarray(new_diag).copy())
        means.append(float(np.mean(new_diag)))
        if opts.record_errors:
            errors.append(_hard_error_mc(cov, denoiser, params.E, mc_err,
                                         opts.seed, (t, 0), opts.chunk))
        if np.max(np.abs(new_diag - diag)) < tol:
            converged = True
            break
        if _is_stalled(means, opts.stall_window, opts.stall_rtol):
            stalled = True
            break
        diag = new_diag
    return SeResult(cov=cov, iterations=len(traj) - 1, converged=converged,
                    stalled=stalled, trajectory=traj, errors=errors)


def predict_error_iid(cov, denoiser, mc, seed=0, post_bp_rounds=None, chunk=_CHUNK):
    '''Error rates of the hard decision at a given (usually final) covariance.'''
    return _hard_error_mc(cov, denoiser, getattr(denoiser, 'E'), mc, seed,
                          ('final', 0), chunk, post_bp_rounds=post_bp_rounds)


# ----------------------------------------------------------------- coupled

def initial_psi_sc(params, base, cov_mode):
    if cov_mode == 'diag':
        return [np.full(params.d, params.E) for _ in range(base.C)]
    return [params.E * np.eye(params.d) for _ in range(base.C)]


def sc_se_step(Psi, params, base, denoiser, mc, seed, t, chunk=_CHUNK):
    '''One coupled step. Returns (Psi_next, T, Phi).'''
    W = base.W
    R, C = W.shape
    d = params.d
    diag_mode = Psi[0].ndim == 1
    eye = 1.0 if diag_mode else np.eye(d)
    Phi = []
    for r in range(R):
        acc = params.sigma2 * (np.ones(d) if diag_mode else np.eye(d))
        for c in np.nonzero(W[r])[0]:
            acc = acc + d * params.mu_in * W[r, c] * Psi[c]
        Phi.append(acc)
    Phi_inv = [_inv_block(P) for P in Phi]
    T = [_harmonic_T(W, Phi_inv, c) for c in range(C)]
    Psi_next = [_mse_mc(T[c], denoiser, params.E, mc, seed, (t, c), chunk)
                for c in range(C)]
    return Psi_next, T, Phi


def sc_se_run(params, base, denoiser, opts=None):
    '''Coupled recursion from Psi = E I in every block.'''
    opts = opts or SeOptions()
    mc = opts.mc or default_mc(params.d, denoiser.name)
    tol = opts.tol if opts.tol is not None else _default_tol(
        params.sigma2, params.d, denoiser.name, mc)
    mc_err = opts.mc_err or mc
    Psi = initial_psi_sc(params, base, denoiser.cov_mode)
    T = Phi = None
    diag_prev = None
    traj = []
    errors = []
    converged = False
    stalled = False
    means = []
    for t in range(opts.max_iter):
        Psi, T, Phi = sc_se_step(Psi, params, base, denoiser, mc,
                                 opts.seed, t, opts.chunk)
        diag = np.stack([Tc if Tc.ndim == 1 else np.diag(Tc) for Tc in T])
        traj.append(diag.copy())
        means.append(float(np.mean(diag)))
        if opts.record_errors:
            errors.append([_hard_error_mc(T[c], denoiser, params.E, mc_err,
                                          opts.seed, (t, c), opts.chunk)
                           for c in range(len(T))])
        if diag_prev is not None and np.max(np.abs(diag - diag_prev)) < tol:
            converged = True
            break
        if _is_stalled(means, opts.stall_window, opts.stall_rtol):
            stalled = True
            break
        diag_prev = diag
    return ScSeResult(Psi=Psi, T=T, Phi=Phi, iterations=len(traj) - 1,
                      converged=converged, stalled=stalled,
                      trajectory=traj, errors=errors)


def predict_error_sc(T, denoiser, mc, seed=0, post_bp_rounds=None, chunk=_CHUNK):
    '''Per-block and block-averaged error rates at per-block covariances T.'''
    per_block = [_hard_error_mc(Tc, denoiser, getattr(denoiser, 'E'), mc, seed,
                                ('final', c), chunk, post_bp_rounds=post_bp_rounds)
                 for c, Tc in enumerate(T)]
    uer = float(np.mean([e.uer for e in per_block]))
    ber = float(np.mean([e.ber for e in per_block]))
    return per_block, ErrorEstimate(uer=uer, ber=ber, mc=mc * len(T))


# ------------------------------------------------------------- trajectories

def trajectory_rows(result, d, mc, seed):
    '''
    Flatten an SeResult or ScSeResult into csv-ready dict rows. Small d
    keeps every diagonal entry; large d keeps summary statistics.
    '''
    rows = []

    def one(t, block, diag, err):
        row = {'t': t, 'block': block}
        if d <= 8:
            for j in range(d):
                row[f'diag_{j + 1}'] = repr(float(diag[j]))
        else:
            row['diag_mean'] = repr(float(np.mean(diag)))
            row['diag_min'] = repr(float(np.min(diag)))
            row['diag_max'] = repr(float(np.max(diag)))
        row['ber'] = repr(err.ber) if err is not None else ''
        row['uer'] = repr(err.uer) if err is not None else ''
        row['mc'] = mc
        row['seed'] = seed
        return row

    if isinstance(result, SeResult):
        for t, diag in enumerate(result.trajectory):
            err = result.errors[t] if t < len(result.errors) else None
            rows.append(one(t, 'iid', diag, err))
    else:
        for t, diag in enumerate(result.trajectory):
            errs = result.errors[t] if t < len(result.errors) else None
            for c in range(diag.shape[0]):
                rows.append(one(t, c, diag[c], errs[c] if errs else None))
    return rows


def trajectory_fieldnames(d):
    cols = ['t', 'block']
    if d <= 8:
        cols += [f'diag_{j + 1}' for j in range(d)]
    else:
        cols += ['diag_mean', 'diag_min', 'diag_max']
    return cols + ['ber', 'uer', 'mc', 'seed']
