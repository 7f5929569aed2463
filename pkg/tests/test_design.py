import math
import warnings

import numpy as np
import pytest

from ampmac import codes, design
from ampmac.rng import stream


def test_energy_from_ebn0_known_values():
    # 0 dB, rate-1 code, sigma2 = 0.5: E = 1 * 2 * 0.5 * 1 = 1
    assert design.energy_from_ebn0(0.0, 1, 1, 0.5) == pytest.approx(1.0)
    # 10 dB multiplies by 10; rate 1/2 halves
    assert design.energy_from_ebn0(10.0, 1, 2, 0.5) == pytest.approx(5.0)
    for db in (-3.0, 0.0, 4.7, 12.0):
        E = design.energy_from_ebn0(db, 4, 7, 1.3)
        assert design.ebn0_from_energy(E, 4, 7, 1.3) == pytest.approx(db)


def test_omega_lambda_base_structure():
    b = design.omega_lambda_base(3, 7)
    assert (b.R, b.C) == (9, 7)
    assert np.allclose(b.W.sum(axis=0), 1.0)
    for c in range(7):
        nz = np.nonzero(b.W[:, c])[0]
        assert np.array_equal(nz, np.arange(c, c + 3))
        assert np.allclose(b.W[nz, c], 1 / 3)
    assert design.iid_base().is_iid
    with pytest.raises(AssertionError):
        design.omega_lambda_base(3, 4)   # lam < 2 omega - 1
    with pytest.raises(AssertionError):
        design.omega_lambda_base(0, 1)


def test_system_params_consistency_and_rounding():
    code = codes.hamming74()
    base = design.omega_lambda_base(2, 3)   # R=4, C=3
    p = design.system_params(L=100, code=code, ebn0_db=6.0, mu=0.5, base=base)
    assert p.L == 99 and p.L % 3 == 0
    assert p.nt % 4 == 0
    assert p.n == p.nt * 7
    assert p.mu == pytest.approx(p.L / p.n)
    assert p.S == pytest.approx(p.mu * 4)
    assert p.mu_in == pytest.approx(p.mu * 4 / 3)
    assert p.E == pytest.approx(design.energy_from_ebn0(6.0, 4, 7, 1.0))


def test_sample_design_block_statistics():
    base = design.omega_lambda_base(2, 3)
    nt, L = 4 * 500, 3 * 400
    dm = design.sample_design(base, nt, L, seed=11)
    assert dm.A.shape == (nt, L)
    nR, LC = dm.nR, dm.LC
    for r in range(base.R):
        for c in range(base.C):
            blk = dm.A[r * nR:(r + 1) * nR, c * LC:(c + 1) * LC]
            w = base.W[r, c]
            if w == 0:
                assert not blk.any()
            else:
                assert blk.var() == pytest.approx(w / nR, rel=0.05)
    assert dm.row_block(nR) == 1 and dm.col_block(LC - 1) == 0


def test_iid_equals_coupled_1_1_bitwise():
    iid = design.sample_design(design.iid_base(), 64, 96, seed=5)
    one = design.omega_lambda_base(1, 1)
    coupled = design.sample_design(one, 64, 96, seed=5)
    assert np.array_equal(iid.A, coupled.A)
    # and a different seed gives a different matrix
    other = design.sample_design(design.iid_base(), 64, 96, seed=6)
    assert not np.array_equal(iid.A, other.A)


def test_sample_design_divisibility_guard():
    with pytest.raises(AssertionError):
        design.sample_design(design.omega_lambda_base(2, 3), 10, 9, seed=0)


def test_simulate_shapes_and_determinism():
    code = codes.hamming74()
    p = design.system_params(L=300, code=code, ebn0_db=8.0, mu=0.4)
    inst = design.simulate(p, code, seed=3)
    assert inst.Y.shape == (p.nt, 7) and inst.X.shape == (p.L, 7)
    assert codes.satisfies_checks(code.H, (inst.X < 0).astype(np.uint8)).all()
    assert np.allclose(inst.X ** 2, p.E)
    again = design.simulate(p, code, seed=3)
    assert np.array_equal(inst.Y, again.Y) and np.array_equal(inst.bits, again.bits)
    # Y actually equals A X + noise with the documented substreams
    noise = stream(3, 'noise').standard_normal((p.nt, p.d)) * math.sqrt(p.sigma2)
    assert np.allclose(inst.Y, inst.design.A @ inst.X + noise)


def test_noise_variance_estimator_concentrates():
    code = codes.hamming74()
    p = design.system_params(L=3000, code=code, ebn0_db=6.0, mu=0.3)
    errs = []
    for seed in range(5):
        inst = design.simulate(p, code, seed=seed)
        est = design.estimate_noise_variance(inst.Y, p.mu, p.d, p.E)
        errs.append(abs(est - p.sigma2) / p.sigma2)
    assert np.median(errs) < 0.15


def test_noise_variance_estimator_negative_flagged():
    Y = np.zeros((10, 4))
    with pytest.warns(UserWarning, match='non-positive'):
        est = design.estimate_noise_variance(Y, 1.0, 4, 1.0)
    assert est == pytest.approx(-4.0)
