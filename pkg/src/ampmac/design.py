'''
System geometry, design matrices, and channel simulation.

L users each send one codeword row of length d through a shared Gaussian
channel: Y = A X + noise, with A of shape (nt, L), nt = n / d channel uses
per coordinate, user density mu = L / n, and spectral efficiency S = mu * k.
Eb/N0 is (E * d / k) / (2 sigma^2) where E is the per-symbol energy.

A spatially coupled design splits A into an R x C grid of blocks whose
variances follow a banded base matrix W (columns sum to 1); the iid design
is the special case of a single 1 x 1 block. Both are sampled by the same
block routine with one substream per block, so an (omega=1, lambda=1)
coupled design is bit-identical to the iid one at equal seed.
'''

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .codes import bpsk_map, encode
from .rng import stream


def energy_from_ebn0(ebn0_db, k, d, sigma2):
    '''Per-symbol energy E for a target Eb/N0 in dB. Eb = E d / k, N0 = 2 sigma^2.'''
    assert sigma2 > 0 and 0 < k <= d
    return float(10.0 ** (ebn0_db / 10.0) * 2.0 * sigma2 * k / d)


def ebn0_from_energy(E, k, d, sigma2):
    assert E > 0 and sigma2 > 0
    return float(10.0 * math.log10(E * d / (k * 2.0 * sigma2)))


@dataclass(frozen=True)
class BaseMatrix:
    '''Block variance profile W (R x C); entries scale block variances.'''
    W: np.ndarray
    omega: int
    lam: int

    def __post_init__(self):
        W = np.ascontiguousarray(self.W, dtype=np.float64)
        object.__setattr__(self, 'W', W)
        assert W.ndim == 2 and (W >= 0).all()
        assert np.allclose(W.sum(axis=0), 1.0), 'base matrix columns must sum to 1'
        W.flags.writeable = False

    @property
    def R(self):
        return self.W.shape[0]

    @property
    def C(self):
        return self.W.shape[1]

    @property
    def is_iid(self):
        return self.W.shape == (1, 1)


def omega_lambda_base(omega, lam):
    '''
    Banded coupling profile: R = lam + omega - 1 rows, C = lam columns,
    W[r, c] = 1/omega for c <= r <= c + omega - 1, else 0.
    Requires omega >= 1 and lam >= 2 * omega - 1.
    '''
    assert omega >= 1 and lam >= 2 * omega - 1, 'need omega >= 1 and lam >= 2 omega - 1'
    R, C = lam + omega - 1, lam
    W = np.zeros((R, C))
    for c in range(C):
        W[c:c + omega, c] = 1.0 / omega
    return BaseMatrix(W=W, omega=omega, lam=lam)


def iid_base():
    return omega_lambda_base(1, 1)


@dataclass(frozen=True)
class SystemParams:
    '''Fully resolved system sizes; all consistency checks run on build.'''
    L: int
    d: int
    k: int
    nt: int
    n: int
    mu: float
    mu_in: float
    sigma2: float
    E: float
    ebn0_db: float
    S: float

    def __post_init__(self):
        assert self.L >= 1 and self.d >= 1 and 1 <= self.k <= self.d
        assert self.nt >= 1 and self.n == self.nt * self.d
        assert self.sigma2 > 0 and self.E > 0
        assert math.isclose(self.mu, self.L / self.n, rel_tol=1e-12)
        assert math.isclose(self.S, self.mu * self.k, rel_tol=1e-12)
        assert math.isclose(self.E, energy_from_ebn0(self.ebn0_db, self.k, self.d, self.sigma2),
                            rel_tol=1e-9)
        assert self.mu > 0 and self.mu_in > 0


def system_params(L, code, ebn0_db, mu, sigma2=1.0, base=None):
    '''
    Resolve sizes for a target user density mu. L is rounded down to a
    multiple of the base matrix's C and the channel-use count nt to the
    nearest multiple of R (at least R), so block boundaries land exactly;
    the returned params carry the actual mu after rounding.
    '''
    base = base or iid_base()
    R, C = base.R, base.C
    assert L >= C, 'need at least one user per column block'
    L = (L // C) * C
    nt = L / (mu * code.d)
    nt = max(R, int(round(nt / R)) * R)
    n = nt * code.d
    mu_actual = L / n
    E = energy_from_ebn0(ebn0_db, code.k, code.d, sigma2)
    return SystemParams(L=L, d=code.d, k=code.k, nt=nt, n=n, mu=mu_actual,
                        mu_in=mu_actual * R / C, sigma2=float(sigma2), E=E,
                        ebn0_db=float(ebn0_db), S=mu_actual * code.k)


@dataclass
class DesignMatrix:
    '''A sampled design with its block geometry.'''
    A: np.ndarray            # (nt, L)
    base: BaseMatrix
    nR: int                  # rows per block
    LC: int                  # columns per block

    @property
    def nt(self):
        return self.A.shape[0]

    @property
    def L(self):
        return self.A.shape[1]

    def row_block(self, i):
        return i // self.nR

    def col_block(self, ell):
        return ell // self.LC


def sample_design(base, nt, L, seed, dtype=np.float64):
    '''
    Draw A block by block: block (r, c) is iid N(0, W[r,c] / (nt / R)),
    from substream (seed, "design", r, c). Zero-variance blocks are exact
    zeros and consume no randomness. dtype=float32 generates the blocks in
    float32 directly, so a large A never exists in float64.
    '''
    R, C = base.R, base.C
    assert nt % R == 0 and L % C == 0, 'block sizes must divide nt and L'
    nR, LC = nt // R, L // C
    dtype = np.dtype(dtype)
    A = np.zeros((nt, L), dtype=dtype)
    for r in range(R):
        for c in range(C):
            w = base.W[r, c]
            if w == 0.0:
                continue
            g = stream(seed, 'design', r, c).standard_normal((nR, LC), dtype=dtype)
            g *= dtype.type(math.sqrt(w / nR))
            A[r * nR:(r + 1) * nR, c * LC:(c + 1) * LC] = g
    return DesignMatrix(A=A, base=base, nR=nR, LC=LC)


@dataclass
class TransmissionInstance:
    '''One simulated transmission: who sent what, through which A, into what Y.'''
    params: SystemParams
    design: DesignMatrix
    bits: np.ndarray          # (L, k) message bits
    X: np.ndarray             # (L, d) transmitted +-sqrt(E) rows
    Y: np.ndarray             # (nt, d) channel output


def simulate(params, code, seed, base=None, dtype=np.float64):
    '''
    Sample messages, design, and noise from substreams of seed and produce
    Y = A X + noise with noise iid N(0, sigma2). dtype controls the design
    matrix storage (float32 keeps memory down at large L; X and Y stay
    float64 either way).
    '''
    base = base or iid_base()
    assert code.d == params.d and code.k == params.k
    bits = stream(seed, 'payload').integers(0, 2, size=(params.L, params.k)).astype(np.uint8)
    X = bpsk_map(encode(code, bits), params.E)
    design = sample_design(base, params.nt, params.L, seed, dtype=dtype)
    noise = stream(seed, 'noise').standard_normal((params.nt, params.d)) * math.sqrt(params.sigma2)
    # multiply in A's dtype so no float64 copy of A is ever made
    Y = design.A @ np.asarray(X, dtype=design.A.dtype) + noise
    return TransmissionInstance(params=params, design=design, bits=bits, X=X, Y=Y)


def estimate_noise_variance(Y, mu, d, E):
    '''
    Estimate sigma^2 from the channel output alone: ||Y||_F^2 / n - d mu E.
    May come out negative at finite size (warned, returned as-is); decoders
    should floor it before use.
    '''
    n = Y.size
    est = float(np.sum(Y * Y)) / n - d * mu * E
    if est <= 0:
        warnings.warn(f'noise variance estimate {est:.3e} is non-positive at n={n}')
    return est
