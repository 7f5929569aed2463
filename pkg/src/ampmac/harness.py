'''
Sweep harness: evaluates operating points over an Eb/N0 grid, searches the
largest spectral efficiency that still hits a target bit error rate, and
writes flat csv rows an external plotting tool can consume. Rows are
computed independently (thread pool sized by AMPMAC_THREADS, default 1) and
assembled in task order, so output is deterministic for a given spec
regardless of worker count; wall_time is the one column that varies.
'''

import csv
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .amp import AmpOptions, measure_error, run_amp_iid, run_amp_sc
from .codes import chain_code, girth, hamming74, ldpc648, uncoded
from .denoisers import make_denoiser, post_bp_decode
from .design import iid_base, omega_lambda_base, simulate, system_params
from .state_evolution import (SeOptions, default_mc, predict_error_iid,
                              predict_error_sc, sc_se_run, se_run_iid)

CSV_COLUMNS = ['code', 'design', 'denoiser', 'bp_rounds', 'post_bp',
               'target_ber', 'mode', 'L', 'sigma2', 'mc', 'max_iter',
               'ebn0_db', 'mu', 'spectral_efficiency', 'ber', 'uer',
               'iterations', 'wall_time', 'method', 'seed', 'error']


def make_code(name):
    '''Named codes usable from specs and the command line.'''
    if name == 'uncoded':
        return uncoded()
    if name == 'hamming74':
        return hamming74()
    if name == 'tree23':
        return chain_code(11)
    if name.startswith('ldpc648-'):
        return ldpc648(name.split('-', 1)[1])
    raise ValueError(f'unknown code {name!r} '
                     "(try uncoded, hamming74, tree23, ldpc648-1/2, ldpc648-5/6)")


def make_base(design, omega=None, lam=None):
    if design == 'iid':
        return iid_base()
    if design == 'sc':
        if omega is None or lam is None:
            raise ValueError('coupled design needs omega and lam')
        return omega_lambda_base(omega, lam)
    raise ValueError(f'unknown design {design!r} (iid or sc)')


def design_label(design, omega, lam):
    return 'iid' if design == 'iid' else f'sc-{omega}-{lam}'


@dataclass
class SweepSpec:
    code: str
    denoiser: str
    ebn0_grid: tuple
    mode: str = 'se'             # 'se' | 'simulate' | 'both'
    design: str = 'iid'
    omega: int = None
    lam: int = None
    mu: float = None             # None in se mode: search max S at target_ber
    target_ber: float = 1e-4
    L: int = 10000
    sigma2: float = 1.0
    bp_rounds: int = 5
    post_bp: bool = False
    post_bp_rounds: int = 200
    mc: int = None               # SE sample count (None: default_mc)
    mc_err: int = None           # error-prediction sample count (None: mc)
    max_iter: int = None         # SE / decoder iteration cap (None: defaults)
    seed: int = 0                # SE seed
    sim_seeds: tuple = (0,)
    amp_jac_mode: str = 'diag'
    amp_dtype: str = None        # e.g. 'float32' for the big matmuls
    se_coarse: int = 5           # max-S search: coarse grid size
    se_bisect: int = 25          # max-S search: bisection step cap
    se_mu_rtol: float = 1.002    # max-S search: mu resolution


@dataclass
class MaxSeResult:
    ebn0_db: float
    mu: float
    spectral_efficiency: float
    feasible: bool
    ber: float = None            # prediction at the returned mu
    uer: float = None
    evaluations: list = field(default_factory=list)   # (mu, ber) in eval order
    fallback_used: bool = False
    hi_saturated: bool = False


def _se_params(spec, ebn0_db, mu, base):
    # L only sets block divisibility for the recursions; keep it modest
    L = spec.L if spec.mode != 'se' else max(base.C, 1000 // base.C * base.C)
    return system_params(L=L, code=make_code(spec.code), ebn0_db=ebn0_db,
                         mu=mu, sigma2=spec.sigma2, base=base)


def se_predict(spec, ebn0_db, mu):
    '''
    Run the covariance recursion at one operating point and predict error
    rates at its final state. Returns (params, ErrorEstimate, run result).
    '''
    base = make_base(spec.design, spec.omega, spec.lam)
    code = make_code(spec.code)
    params = _se_params(spec, ebn0_db, mu, base)
    den = make_denoiser(spec.denoiser, code, params.E, bp_rounds=spec.bp_rounds)
    mc = spec.mc or default_mc(code.d, den.name)
    opts = SeOptions(mc=mc, seed=spec.seed)
    if spec.max_iter:
        opts.max_iter = spec.max_iter
    mc_err = spec.mc_err or mc
    post = spec.post_bp_rounds if spec.post_bp else None
    if base.is_iid:
        res = se_run_iid(params, den, opts)
        est = predict_error_iid(res.cov, den, mc=mc_err, seed=spec.seed,
                                post_bp_rounds=post)
    else:
        res = sc_se_run(params, base, den, opts)
        _, est = predict_error_sc(res.T, den, mc=mc_err, seed=spec.seed,
                                  post_bp_rounds=post)
    return params, est, res


def max_se_at_ebn0(spec, ebn0_db, n_coarse=5, max_bisect=25, grid_n=30,
                   mu_rtol=1.002):
    '''
    Largest spectral efficiency S = mu k whose recursion still predicts
    ber <= target_ber, searched over mu in [1e-3, 10] k/d. Feasibility is
    checked at the bounds first; a coarse log grid guards against a
    non-monotone feasible set (then: full grid scan instead of bisection).
    '''
    code = make_code(spec.code)
    kd = code.k / code.d
    lo, hi = 1e-3 * kd, 10.0 * kd
    evals = []

    def feasible(mu):
        params, est, _ = se_predict(spec, ebn0_db, mu)
        evals.append((params.mu, est.ber, est.uer))
        return est.ber <= spec.target_ber

    def result(mu, ok, **kw):
        nearest = min(evals, key=lambda e: abs(math.log(e[0] / mu)))
        return MaxSeResult(ebn0_db=ebn0_db, mu=mu, feasible=ok,
                           spectral_efficiency=mu * code.k if ok else 0.0,
                           ber=nearest[1], uer=nearest[2],
                           evaluations=evals, **kw)

    if not feasible(lo):
        return result(lo, False)
    if feasible(hi):
        return result(hi, True, hi_saturated=True)
    coarse = np.geomspace(lo, hi, n_coarse)
    flags = [True] + [feasible(m) for m in coarse[1:-1]] + [False]
    first_bad = flags.index(False)
    if any(flags[first_bad:]):
        # feasibility is not a prefix of the grid: scan instead of bisect
        grid = np.geomspace(lo, hi, grid_n)
        ok = [m for m in grid if feasible(m)]
        return result(max(ok), True, fallback_used=True)
    a, b = coarse[first_bad - 1], coarse[first_bad]
    for _ in range(max_bisect):
        if b / a <= mu_rtol:
            break
        m = math.sqrt(a * b)
        if feasible(m):
            a = m
        else:
            b = m
    return result(a, True)


def _base_row(spec, ebn0_db, method, seed):
    return {
        'code': spec.code,
        'design': design_label(spec.design, spec.omega, spec.lam),
        'denoiser': spec.denoiser,
        'bp_rounds': spec.bp_rounds if spec.denoiser == 'bp' else '',
        'post_bp': int(spec.post_bp),
        'target_ber': repr(spec.target_ber),
        'mode': spec.mode,
        'L': spec.L,
        'sigma2': repr(spec.sigma2),
        'mc': '',
        'max_iter': spec.max_iter if spec.max_iter else '',
        'ebn0_db': repr(float(ebn0_db)),
        'mu': '', 'spectral_efficiency': '', 'ber': '', 'uer': '',
        'iterations': '', 'wall_time': '', 'method': method, 'seed': seed,
        'error': '',
    }


def _se_task(spec, ebn0_db):
    row = _base_row(spec, ebn0_db, 'se', spec.seed)
    code = make_code(spec.code)
    row['mc'] = spec.mc or default_mc(code.d, spec.denoiser)
    if spec.mu is None:
        res = max_se_at_ebn0(spec, ebn0_db, n_coarse=spec.se_coarse,
                             max_bisect=spec.se_bisect, mu_rtol=spec.se_mu_rtol)
        row['mu'] = repr(res.mu)
        row['spectral_efficiency'] = repr(res.spectral_efficiency)
        if res.ber is not None:
            row['ber'] = repr(res.ber)
            row['uer'] = repr(res.uer)
        row['iterations'] = len(res.evaluations)
        if not res.feasible:
            row['error'] = 'infeasible at mu lower bound'
    else:
        params, est, res = se_predict(spec, ebn0_db, spec.mu)
        row['mu'] = repr(params.mu)
        row['spectral_efficiency'] = repr(params.S)
        row['ber'] = repr(est.ber)
        row['uer'] = repr(est.uer)
        row['iterations'] = res.iterations
    return row


def _amp_task(spec, ebn0_db, seed):
    row = _base_row(spec, ebn0_db, 'amp', seed)
    base = make_base(spec.design, spec.omega, spec.lam)
    code = make_code(spec.code)
    params = system_params(L=spec.L, code=code, ebn0_db=ebn0_db, mu=spec.mu,
                           sigma2=spec.sigma2, base=base)
    row['mu'] = repr(params.mu)
    row['spectral_efficiency'] = repr(params.S)
    sim_dtype = np.dtype(spec.amp_dtype) if spec.amp_dtype else np.float64
    inst = simulate(params, code, seed, base=base, dtype=sim_dtype)
    den = make_denoiser(spec.denoiser, code, params.E, bp_rounds=spec.bp_rounds)
    opts = AmpOptions(jac_mode=spec.amp_jac_mode)
    if spec.amp_dtype:
        opts.dtype = np.dtype(spec.amp_dtype)
    if spec.max_iter:
        opts.max_iter = spec.max_iter
    elif not base.is_iid:
        opts.max_iter = 500
    if base.is_iid:
        res = run_amp_iid(inst.Y, inst.design.A, params, den, opts)
    else:
        res = run_amp_sc(inst.Y, inst.design, params, den, opts)
    if res.failure:
        row['error'] = res.failure
        row['iterations'] = res.iterations
        return row
    if spec.post_bp:
        bits_true = (inst.X < 0)
        if base.is_iid:
            diag = res.cov if np.ndim(res.cov) == 1 else np.diag(res.cov)
            bits, _ = post_bp_decode(res.S, diag, den.graph, params.E,
                                     max_rounds=spec.post_bp_rounds)
            wrong = bits != bits_true
        else:
            wrong = np.zeros_like(bits_true)
            LC = inst.design.LC
            for c, Tc in enumerate(res.cov):
                sl = slice(c * LC, (c + 1) * LC)
                diag = Tc if Tc.ndim == 1 else np.diag(Tc)
                bits, _ = post_bp_decode(res.S[sl], diag, den.graph, params.E,
                                         max_rounds=spec.post_bp_rounds)
                wrong[sl] = bits != bits_true[sl]
        uer, ber = float(wrong.any(axis=1).mean()), float(wrong.mean())
    else:
        uer, ber = measure_error(res.X_hard, inst.X)
    row['ber'] = repr(ber)
    row['uer'] = repr(uer)
    row['iterations'] = res.iterations
    return row


def _run_task(spec, task):
    kind, ebn0_db, seed = task
    started = time.perf_counter()
    try:
        row = _se_task(spec, ebn0_db) if kind == 'se' else _amp_task(spec, ebn0_db, seed)
    except Exception as exc:  # noqa: BLE001 - failed points become error rows
        row = _base_row(spec, ebn0_db, kind if kind == 'se' else 'amp', seed)
        row['error'] = f'{type(exc).__name__}: {exc}'
    row['wall_time'] = f'{time.perf_counter() - started:.3f}'
    return row


def _validate(spec):
    if spec.mode not in ('se', 'simulate', 'both'):
        raise ValueError(f'unknown mode {spec.mode!r}')
    if spec.mode in ('simulate', 'both') and spec.mu is None:
        raise ValueError('simulate mode needs a fixed mu')
    if spec.post_bp and spec.denoiser != 'bp':
        raise ValueError('post_bp needs the bp denoiser (it reuses its graph)')
    make_code(spec.code)
    make_base(spec.design, spec.omega, spec.lam)
    if spec.denoiser not in ('bayes', 'marginal', 'bp'):
        raise ValueError(f'unknown denoiser {spec.denoiser!r}')


def run_sweep(spec, csv_path=None):
    '''
    Evaluate every task implied by the spec and return the csv rows (list of
    dicts). Tasks: one se row per grid point (modes se/both), one decoder
    row per (grid point, sim seed) (modes simulate/both).
    '''
    _validate(spec)
    tasks = []
    if spec.mode in ('se', 'both'):
        tasks += [('se', e, spec.seed) for e in spec.ebn0_grid]
    if spec.mode in ('simulate', 'both'):
        tasks += [('amp', e, s) for e in spec.ebn0_grid for s in spec.sim_seeds]
    workers = max(1, int(os.environ.get('AMPMAC_THREADS', '1')))
    if workers == 1:
        rows = [_run_task(spec, t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_run_task, spec, t) for t in tasks]
            rows = [f.result() for f in futures]
    if csv_path:
        write_rows_csv(csv_path, rows, CSV_COLUMNS)
    return rows


def write_rows_csv(path, rows, fieldnames):
    '''Write csv atomically: temp file in the target directory, then replace.'''
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', newline='') as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
