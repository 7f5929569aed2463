'''
Decoder tests. The d = 1 reference decoder below is written with plain
loops, independently of the package internals, and pinned first; the
package decoder must reproduce it iterate by iterate. The coupled decoder
with a 1 x 1 base must match the iid decoder on the same data.
'''

import numpy as np
import pytest

from ampmac.amp import (AmpOptions, amp_step_iid, estimate_cov, measure_error,
                        run_amp, run_amp_iid, run_amp_sc)
from ampmac.codes import hamming74, uncoded
from ampmac.denoisers import bayes_denoise, make_denoiser
from ampmac.design import (BaseMatrix, energy_from_ebn0, iid_base,
                           omega_lambda_base, simulate, system_params)


def scalar_amp_reference(y, A, E, sigma2, mu, iters):
    '''d = 1 decoder with tanh denoising, written as explicit loops.'''
    nt, L = A.shape
    sqrtE = np.sqrt(E)
    x = np.zeros(L)
    z_prev = None
    deriv_sum = None
    taus, xs = [], []
    for t in range(iters):
        if t == 0:
            z = y.copy()
            tau = sigma2 + mu * E
        else:
            z = y - A @ x + z_prev * (deriv_sum / nt)
            tau = np.sum(z * z) / nt
        s = x + A.T @ z
        x = sqrtE * np.tanh(sqrtE * s / tau)
        deriv_sum = np.sum((E - x * x) / tau)
        z_prev = z
        taus.append(tau)
        xs.append(x.copy())
    return np.asarray(taus), xs, s


def test_scalar_reference_pinned():
    rng = np.random.default_rng(0)
    nt, L, E = 50, 30, 4.0
    A = rng.normal(0, 1 / np.sqrt(nt), (nt, L))
    x_true = np.sqrt(E) * rng.choice([-1.0, 1.0], L)
    y = A @ x_true + rng.normal(0, 1, nt)
    taus, xs, _ = scalar_amp_reference(y, A, E, 1.0, L / nt, 6)
    assert taus[0] == 1.0 + (L / nt) * E
    assert np.all(np.abs(xs[-1]) <= np.sqrt(E))


def test_decoder_matches_scalar_reference():
    code = uncoded()
    params = system_params(L=300, code=code, ebn0_db=6.0, mu=0.4)
    inst = simulate(params, code, seed=11)
    iters = 8
    taus, xs, s_ref = scalar_amp_reference(
        inst.Y[:, 0], inst.design.A, params.E, params.sigma2, params.mu, iters)
    den = make_denoiser('marginal', code, params.E)
    res = run_amp_iid(inst.Y, inst.design.A, params, den,
                      AmpOptions(max_iter=iters, tol=0.0, record_states=True))
    assert res.iterations == iters
    got_taus = np.array([h[0] for h in res.cov_diag_history])
    assert np.allclose(got_taus, taus, rtol=1e-9)
    for got, ref in zip(res.X_history, xs):
        assert np.allclose(got[:, 0], ref, rtol=1e-8, atol=1e-10)
    assert np.allclose(res.S[:, 0], s_ref, rtol=1e-8, atol=1e-10)


def test_estimate_cov_modes_agree_exactly():
    rng = np.random.default_rng(3)
    Z = rng.normal(size=(200, 5))
    full = estimate_cov(Z, mode='full')
    diag = estimate_cov(Z, mode='diag')
    assert np.array_equal(np.diag(full), diag)
    off = Z.T @ Z / 200
    mask = ~np.eye(5, dtype=bool)
    assert np.allclose(full[mask], off[mask])
    assert np.allclose(full, full.T)


def test_amp_step_correction_orientation():
    rng = np.random.default_rng(4)
    nt, L, d = 40, 20, 3
    Y = rng.normal(size=(nt, d))
    A = rng.normal(size=(nt, L)) / np.sqrt(nt)
    X = rng.normal(size=(L, d))
    Z_prev = rng.normal(size=(nt, d))
    Jfull = rng.normal(size=(d, d))
    Z, S = amp_step_iid(Y, A, X, Z_prev, Jfull)
    assert np.allclose(Z, Y - A @ X + Z_prev @ Jfull.T / nt)
    assert np.allclose(S, X + A.T @ Z)
    Jdiag = rng.normal(size=d)
    Z2, _ = amp_step_iid(Y, A, X, Z_prev, Jdiag)
    assert np.allclose(Z2, Y - A @ X + Z_prev * Jdiag / nt)
    Z3, S3 = amp_step_iid(Y, A, X, Z_prev, None)
    assert np.allclose(Z3, Y - A @ X)


def test_measure_error_counts():
    E = 4.0
    Xt = np.sqrt(E) * np.array([[1, 1], [1, -1], [-1, -1], [1, 1.]])
    Xh = np.sqrt(E) * np.array([[1, 1], [-1, -1], [-1, -1], [1, -1.]])
    uer, ber = measure_error(Xh, Xt)
    assert uer == pytest.approx(2 / 4)
    assert ber == pytest.approx(2 / 8)


def test_correction_term_beats_naive_iteration():
    '''Dropping the residual correction must cost accuracy at equal budget.'''
    code = hamming74()
    params = system_params(L=1200, code=code, ebn0_db=8.0, mu=0.35)
    inst = simulate(params, code, seed=5)
    den = make_denoiser('bayes', code, params.E)
    iters = 25
    res = run_amp_iid(inst.Y, inst.design.A, params, den,
                      AmpOptions(max_iter=iters, tol=0.0))
    _, ber = measure_error(res.X_hard, inst.X)

    X = np.zeros((params.L, params.d))
    A, Y = inst.design.A, inst.Y
    for t in range(iters):
        Z = Y - A @ X
        if t == 0:
            cov = (params.sigma2 + params.d * params.mu * params.E) * np.eye(params.d)
        else:
            cov = estimate_cov(Z, mode='full')
        S = X + A.T @ Z
        X = bayes_denoise(S, cov, den.book)
    _, ber_naive = measure_error(den.hard(S, cov), inst.X)
    assert ber < ber_naive
    assert ber < 1e-2


def test_iid_and_coupled_paths_agree():
    code = hamming74()
    for kind in ('bayes', 'marginal'):
        params = system_params(L=400, code=code, ebn0_db=7.0, mu=0.4, base=iid_base())
        inst = simulate(params, code, seed=21, base=iid_base())
        den = make_denoiser(kind, code, params.E)
        opts = AmpOptions(max_iter=25, tol=0.0, record_states=True)
        ri = run_amp_iid(inst.Y, inst.design.A, params, den, opts)
        rs = run_amp_sc(inst.Y, inst.design, params, den, opts)
        assert ri.iterations == rs.iterations
        for Xi, Xs in zip(ri.X_history, rs.X_history):
            assert np.max(np.abs(Xi - Xs)) < 1e-8
        assert np.array_equal(ri.X_hard, rs.X_hard)
        di = ri.cov_diag_history[-1]
        ds = rs.cov_diag_history[-1]
        assert np.max(np.abs(di - ds) / di) < 1e-8


def test_dispatch_follows_base():
    code = hamming74()
    den = make_denoiser('bayes', code, 1.0)
    params = system_params(L=200, code=code, ebn0_db=7.0, mu=0.4)
    inst = simulate(params, code, seed=2)
    res = run_amp(inst, make_denoiser('bayes', code, params.E),
                  AmpOptions(max_iter=5, tol=0.0))
    assert isinstance(res.cov, np.ndarray)

    base = omega_lambda_base(2, 3)
    params_sc = system_params(L=360, code=code, ebn0_db=8.0, mu=0.4, base=base)
    inst_sc = simulate(params_sc, code, seed=2, base=base)
    res_sc = run_amp(inst_sc, make_denoiser('bayes', code, params_sc.E),
                     AmpOptions(max_iter=5, tol=0.0))
    assert isinstance(res_sc.cov, list) and len(res_sc.cov) == base.C


def test_coupled_end_to_end_decodes():
    code = hamming74()
    base = omega_lambda_base(2, 3)
    params = system_params(L=900, code=code, ebn0_db=9.0, mu=0.35, base=base)
    inst = simulate(params, code, seed=7, base=base)
    den = make_denoiser('bayes', code, params.E)
    res = run_amp_sc(inst.Y, inst.design, params, den)
    assert res.ok
    uer, ber = measure_error(res.X_hard, inst.X)
    assert ber < 2e-2


def test_float32_work_dtype():
    code = hamming74()
    params = system_params(L=800, code=code, ebn0_db=8.0, mu=0.35)
    inst = simulate(params, code, seed=9)
    den = make_denoiser('bayes', code, params.E)
    r64 = run_amp_iid(inst.Y, inst.design.A, params, den)
    r32a = run_amp_iid(inst.Y, inst.design.A, params, den,
                       AmpOptions(dtype=np.float32))
    r32b = run_amp_iid(inst.Y, inst.design.A, params, den,
                       AmpOptions(dtype=np.float32))
    assert np.array_equal(r32a.X_hard, r32b.X_hard)
    _, b64 = measure_error(r64.X_hard, inst.X)
    _, b32 = measure_error(r32a.X_hard, inst.X)
    assert abs(b64 - b32) < 5e-3


def test_nonfinite_input_rejected():
    code = hamming74()
    params = system_params(L=100, code=code, ebn0_db=8.0, mu=0.4)
    inst = simulate(params, code, seed=1)
    Y = inst.Y.copy()
    Y[0, 0] = np.nan
    den = make_denoiser('bayes', code, params.E)
    with pytest.raises(ValueError):
        run_amp_iid(Y, inst.design.A, params, den)
    with pytest.raises(ValueError):
        run_amp_sc(Y, inst.design, params, den)


def test_converges_and_reports():
    code = hamming74()
    params = system_params(L=600, code=code, ebn0_db=9.0, mu=0.3)
    inst = simulate(params, code, seed=13)
    den = make_denoiser('bayes', code, params.E)
    res = run_amp_iid(inst.Y, inst.design.A, params, den)
    assert res.ok and res.converged
    assert res.iterations < 300
    assert len(res.cov_diag_history) == res.iterations
