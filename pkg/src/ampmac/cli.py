'''
Command line front end. Subcommands:

  simulate          decode one simulated transmission, print metrics
  se                run the covariance recursion at one operating point
  sweep             grid evaluation to csv (config file + flag overrides)
  girth             shortest cycle of a code's Tanner graph
  validate-jacobian finite-difference check of the message passing Jacobian

Exit codes: 0 success, 1 usage error, 2 runtime failure.
'''

import argparse
import json
import math
import os
import sys

import numpy as np

from .amp import AmpOptions, measure_error, run_amp
from .codes import code_from_alist, girth, tanner_graph
from .denoisers import bp_denoise, bp_jacobian_full, make_denoiser
from .design import simulate, system_params
from .harness import (CSV_COLUMNS, SweepSpec, design_label, make_base,
                      make_code, run_sweep, write_rows_csv)
from .rng import stream
from .state_evolution import (SeOptions, predict_error_iid, predict_error_sc,
                              sc_se_run, se_run_iid, trajectory_fieldnames,
                              trajectory_rows, default_mc)


class _Parser(argparse.ArgumentParser):
    '''argparse exits 2 on usage errors; this tool reserves 2 for runtime.'''

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f'{self.prog}: error: {message}\n')
        raise SystemExit(1)


def _floats(text):
    return tuple(float(x) for x in text.split(',') if x.strip() != '')


def _ints(text):
    return tuple(int(x) for x in text.split(',') if x.strip() != '')


def _add_system_flags(p):
    p.add_argument('--code', help='uncoded | hamming74 | tree23 | ldpc648-1/2 | ldpc648-5/6')
    p.add_argument('--denoiser', help='bayes | marginal | bp')
    p.add_argument('--design', help='iid | sc')
    p.add_argument('--omega', type=int)
    p.add_argument('--lam', type=int)
    p.add_argument('--bp-rounds', type=int, dest='bp_rounds')
    p.add_argument('--post-bp', action='store_const', const=True, dest='post_bp')
    p.add_argument('--post-bp-rounds', type=int, dest='post_bp_rounds')
    p.add_argument('--sigma2', type=float)
    p.add_argument('--max-iter', type=int, dest='max_iter')
    p.add_argument('--seed', type=int)


def build_parser():
    parser = _Parser(prog='ampmac', description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest='command', metavar='command',
                                parser_class=_Parser)

    ps = sub.add_parser('simulate', help='decode one simulated transmission')
    _add_system_flags(ps)
    ps.add_argument('--ebn0', type=float, required=True, help='Eb/N0 in dB')
    ps.add_argument('--mu', type=float, required=True, help='users per channel use')
    ps.add_argument('--L', type=int, default=1000)
    ps.add_argument('--jac-mode', choices=('diag', 'full'), default='diag', dest='jac_mode')
    ps.add_argument('--dtype', choices=('float32', 'float64'))

    pe = sub.add_parser('se', help='covariance recursion at one point')
    _add_system_flags(pe)
    pe.add_argument('--ebn0', type=float, required=True)
    pe.add_argument('--mu', type=float, required=True)
    pe.add_argument('--L', type=int, default=1000)
    pe.add_argument('--mc', type=int)
    pe.add_argument('--mc-err', type=int, dest='mc_err')
    pe.add_argument('--record-errors', action='store_true', dest='record_errors')
    pe.add_argument('--trajectory-out', dest='trajectory_out',
                    help='write the per-iteration trajectory as csv')

    pw = sub.add_parser('sweep', help='grid evaluation to csv')
    _add_system_flags(pw)
    pw.add_argument('--config', help='json file with SweepSpec fields; flags override')
    pw.add_argument('--ebn0', type=_floats, help='comma separated dB grid')
    pw.add_argument('--mode', choices=('se', 'simulate', 'both'))
    pw.add_argument('--mu', type=float)
    pw.add_argument('--target-ber', type=float, dest='target_ber')
    pw.add_argument('--L', type=int)
    pw.add_argument('--mc', type=int)
    pw.add_argument('--mc-err', type=int, dest='mc_err')
    pw.add_argument('--sim-seeds', type=_ints, dest='sim_seeds')
    pw.add_argument('--jac-mode', choices=('diag', 'full'), dest='amp_jac_mode')
    pw.add_argument('--dtype', choices=('float32', 'float64'), dest='amp_dtype')
    pw.add_argument('--out', required=True, help='csv output path')

    pg = sub.add_parser('girth', help='shortest Tanner graph cycle')
    pg.add_argument('--code')
    pg.add_argument('--alist', help='path to an alist parity file')

    pv = sub.add_parser('validate-jacobian',
                        help='finite-difference check of the message passing Jacobian')
    pv.add_argument('--code')
    pv.add_argument('--alist')
    pv.add_argument('--rounds', type=int, default=2)
    pv.add_argument('--trials', type=int, default=20)
    pv.add_argument('--amplitude', type=float, default=1.5)
    pv.add_argument('--energy', type=float, default=4.0)
    pv.add_argument('--tol', type=float, default=1e-5)
    pv.add_argument('--seed', type=int, default=0)

    return parser


def _require(args, parser, *names):
    for name in names:
        if getattr(args, name, None) is None:
            parser.error(f'--{name.replace("_", "-")} is required')


def _resolve_code(args, parser):
    if getattr(args, 'alist', None):
        return code_from_alist(args.alist)
    if args.code:
        return make_code(args.code)
    parser.error('--code or --alist is required')


def cmd_simulate(args, parser):
    _require(args, parser, 'code', 'denoiser')
    if os.environ.get('AMPMAC_CI') and args.seed is None:
        parser.error('--seed is required when AMPMAC_CI is set')
    seed = 0 if args.seed is None else args.seed
    code = make_code(args.code)
    base = make_base(args.design or 'iid', args.omega, args.lam)
    params = system_params(L=args.L, code=code, ebn0_db=args.ebn0, mu=args.mu,
                           sigma2=args.sigma2 or 1.0, base=base)
    sim_dtype = np.dtype(args.dtype) if args.dtype else np.float64
    inst = simulate(params, code, seed, base=base, dtype=sim_dtype)
    den = make_denoiser(args.denoiser, code, params.E,
                        bp_rounds=args.bp_rounds or 5)
    opts = AmpOptions(jac_mode=args.jac_mode)
    if args.dtype:
        opts.dtype = np.dtype(args.dtype)
    if args.max_iter:
        opts.max_iter = args.max_iter
    elif not base.is_iid:
        opts.max_iter = 500
    res = run_amp(inst, den, opts)
    uer, ber = measure_error(res.X_hard, inst.X)
    out = {
        'ber': repr(ber), 'uer': repr(uer),
        'iterations': res.iterations, 'converged': res.converged,
        'failure': res.failure or '', 'ebn0_db': repr(float(args.ebn0)),
        'mu': repr(params.mu), 'spectral_efficiency': repr(params.S),
        'L': params.L, 'seed': seed,
        'code': args.code, 'denoiser': args.denoiser,
        'design': design_label(args.design or 'iid', args.omega, args.lam),
    }
    for key in sorted(out):
        print(f'{key}={out[key]}')
    return 0


def cmd_se(args, parser):
    _require(args, parser, 'code', 'denoiser')
    seed = 0 if args.seed is None else args.seed
    code = make_code(args.code)
    base = make_base(args.design or 'iid', args.omega, args.lam)
    params = system_params(L=args.L, code=code, ebn0_db=args.ebn0, mu=args.mu,
                           sigma2=args.sigma2 or 1.0, base=base)
    den = make_denoiser(args.denoiser, code, params.E,
                        bp_rounds=args.bp_rounds or 5)
    mc = args.mc or default_mc(code.d, den.name)
    opts = SeOptions(mc=mc, seed=seed, record_errors=args.record_errors,
                     mc_err=args.mc_err)
    if args.max_iter:
        opts.max_iter = args.max_iter
    post = (args.post_bp_rounds or 200) if args.post_bp else None
    if base.is_iid:
        res = se_run_iid(params, den, opts)
        est = predict_error_iid(res.cov, den, mc=args.mc_err or mc, seed=seed,
                                post_bp_rounds=post)
    else:
        res = sc_se_run(params, base, den, opts)
        _, est = predict_error_sc(res.T, den, mc=args.mc_err or mc, seed=seed,
                                  post_bp_rounds=post)
    if args.trajectory_out:
        rows = trajectory_rows(res, d=code.d, mc=mc, seed=seed)
        write_rows_csv(args.trajectory_out, rows, trajectory_fieldnames(code.d))
    out = {
        'ber': repr(est.ber), 'uer': repr(est.uer),
        'iterations': res.iterations, 'converged': res.converged,
        'stalled': res.stalled, 'mu': repr(params.mu),
        'spectral_efficiency': repr(params.S), 'mc': mc, 'seed': seed,
    }
    for key in sorted(out):
        print(f'{key}={out[key]}')
    return 0


_SWEEP_FIELDS = {f for f in SweepSpec.__dataclass_fields__}


def cmd_sweep(args, parser):
    config = {}
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
        unknown = set(config) - _SWEEP_FIELDS
        if unknown:
            parser.error(f'unknown config keys: {sorted(unknown)}')
        if 'ebn0_grid' in config:
            config['ebn0_grid'] = tuple(config['ebn0_grid'])
        if 'sim_seeds' in config:
            config['sim_seeds'] = tuple(config['sim_seeds'])
    overrides = {
        'code': args.code, 'denoiser': args.denoiser, 'ebn0_grid': args.ebn0,
        'mode': args.mode, 'design': args.design, 'omega': args.omega,
        'lam': args.lam, 'mu': args.mu, 'target_ber': args.target_ber,
        'L': args.L, 'sigma2': args.sigma2, 'bp_rounds': args.bp_rounds,
        'post_bp': args.post_bp, 'post_bp_rounds': args.post_bp_rounds,
        'mc': args.mc, 'mc_err': args.mc_err, 'max_iter': args.max_iter,
        'seed': args.seed, 'sim_seeds': args.sim_seeds,
        'amp_jac_mode': args.amp_jac_mode, 'amp_dtype': args.amp_dtype,
    }
    merged = dict(config)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for required in ('code', 'denoiser', 'ebn0_grid'):
        if required not in merged:
            parser.error(f'{required} must come from --config or flags')
    spec = SweepSpec(**merged)
    rows = run_sweep(spec, csv_path=args.out)
    failed = sum(1 for r in rows if r['error'])
    print(f'wrote {args.out} ({len(rows)} rows, {failed} failed)')
    return 0


def cmd_girth(args, parser):
    code = _resolve_code(args, parser)
    g = girth(code.H)
    print(f'girth={g} d={code.d} k={code.k} checks={code.H.shape[0]}')
    return 0


def cmd_validate_jacobian(args, parser):
    code = _resolve_code(args, parser)
    graph = tanner_graph(code.H)
    E = args.energy
    gen = stream(args.seed, 'fdcheck')
    worst = 0.0
    eps = 1e-6
    for _ in range(args.trials):
        s = args.amplitude * gen.standard_normal(code.d)
        diag = 0.5 + gen.random(code.d)
        try:
            J = bp_jacobian_full(s, diag, graph, args.rounds, E)
        except ValueError as exc:
            print(f'refused: {exc}')
            return 2
        fd = np.zeros_like(J)
        for j in range(code.d):
            hi = s.copy()
            lo = s.copy()
            hi[j] += eps
            lo[j] -= eps
            num = bp_denoise(hi, diag, graph, args.rounds, E)[0] \
                - bp_denoise(lo, diag, graph, args.rounds, E)[0]
            fd[:, j] = num / (2 * eps)
        scale = max(np.abs(fd).max(), 1e-12)
        worst = max(worst, float(np.abs(J - fd).max() / scale))
    print(f'max_rel_err={worst:.3e} tol={args.tol:.3e} '
          f'trials={args.trials} rounds={args.rounds} girth={girth(code.H)}')
    return 0 if worst < args.tol else 2


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        'simulate': cmd_simulate,
        'se': cmd_se,
        'sweep': cmd_sweep,
        'girth': cmd_girth,
        'validate-jacobian': cmd_validate_jacobian,
    }
    if args.command is None:
        parser.error('a subcommand is required')
    try:
        return handlers[args.command](args, parser)
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 2
        sys.stderr.write(f'ampmac: {type(exc).__name__}: {exc}\n')
        return 2


if __name__ == '__main__':
    sys.exit(main())
