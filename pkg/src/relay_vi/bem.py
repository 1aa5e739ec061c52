"""Oversampled complex-exponential basis expansion of a time-varying channel.

Coefficients are stored q-major: column ``j = (q + Q) * l_span + l``.
"""

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _doppler_operators(n, v, q_max):
    """C_q = F diag(phi_q) F^H for q = -Q..Q, shape (2Q+1, N, N)."""
    q = np.arange(-q_max, q_max + 1)
    phi = np.exp(2j * np.pi * np.outer(q, np.arange(n)) / (v * n))
    finv = np.fft.ifft(np.eye(n), axis=0, norm="ortho")
    ops = np.fft.fft(phi[:, :, None] * finv[None], axis=1, norm="ortho")
    ops.setflags(write=False)
    phi.setflags(write=False)
    return phi, ops


@lru_cache(maxsize=32)
def _delay_phases(n, l_span):
    """W[k, l] = exp(-j 2 pi k l / N), the diagonal of F P(l) F^H."""
    w = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(l_span)) / n)
    w.setflags(write=False)
    return w


@dataclass(frozen=True)
class BemBasis:
    n: int
    v: int
    q_max: int
    l_span: int
    active: np.ndarray = None

    def __post_init__(self):
        if self.active is None:
            object.__setattr__(self, "active", np.arange(self.n_full))
        else:
            act = np.asarray(self.active, dtype=int)
            if act.size and (act.min() < 0 or act.max() >= self.n_full):
                raise ValueError("active column index out of range")
            object.__setattr__(self, "active", act)

    @property
    def n_full(self):
        return (2 * self.q_max + 1) * self.l_span

    @property
    def n_active(self):
        return self.active.size

    @property
    def phi(self):
        return _doppler_operators(self.n, self.v, self.q_max)[0]

    @property
    def doppler_ops(self):
        return _doppler_operators(self.n, self.v, self.q_max)[1]

    @property
    def delay_phases(self):
        return _delay_phases(self.n, self.l_span)

    def q_of(self, j):
        return np.asarray(j) // self.l_span - self.q_max

    def l_of(self, j):
        return np.asarray(j) % self.l_span

    def index(self, q, l):
        return (np.asarray(q) + self.q_max) * self.l_span + np.asarray(l)

    def with_active(self, active):
        return replace(self, active=np.asarray(active, dtype=int))

    def full_coeffs(self, mu):
        """Scatter active coefficients into the full (2Q+1, L) grid."""
        full = np.zeros(self.n_full, dtype=complex)
        full[self.active] = mu
        return full.reshape(2 * self.q_max + 1, self.l_span)


def make_basis(n, v, f_upper_norm, l_cp):
    """Basis with Q = ceil(V * N f_U T_s); ``f_upper_norm`` is N f_U T_s."""
    if v < 1:
        raise ValueError("oversampling factor must be >= 1")
    if f_upper_norm < 0:
        raise ValueError("Doppler bound must be non-negative")
    q_max = math.ceil(v * f_upper_norm - 1e-9)
    return BemBasis(n, v, max(q_max, 0), l_cp)


def coeffs_to_taps(basis, mu):
    """Tap trajectories mu_bar(n, l) = sum_q mu_q(l) phi_q(n), shape (N, L)."""
    return basis.phi.T @ basis.full_coeffs(mu)


def taps_to_coeffs(basis, taps):
    """Least-squares fit of tap trajectories onto the active columns."""
    phi = basis.phi.T
    design = np.zeros((basis.n * basis.l_span, basis.n_active), dtype=complex)
    q_idx = basis.q_of(basis.active) + basis.q_max
    l_idx = basis.l_of(basis.active)
    for col, (qi, l) in enumerate(zip(q_idx, l_idx)):
        design[l::basis.l_span, col] = phi[:, qi]
    taps = np.asarray(taps)[:, :basis.l_span]
    taps = np.pad(taps, ((0, 0), (0, basis.l_span - taps.shape[1])))
    target = taps.reshape(-1)
    return np.linalg.lstsq(design, target, rcond=None)[0]


def operator_G(x, basis):
    """Columns F diag(phi_q) P(l) F^H x for every active (q, l); shape (N, |active|)."""
    values = getattr(x, "values", x)
    xw = np.asarray(values)[:, None] * basis.delay_phases
    full = np.einsum("qkn,nl->kql", basis.doppler_ops, xw).reshape(basis.n, -1)
    return full[:, basis.active]


def operator_D(mu, basis):
    """Frequency-domain channel matrix F H F^H for coefficients ``mu``."""
    grid = basis.full_coeffs(mu)
    diag = grid @ basis.delay_phases.T
    return np.einsum("qkn,qn->kn", basis.doppler_ops, diag)


def band_tensor(basis, kappa):
    """Linear map from coefficients to the 2*kappa+1 band entries of each row.

    ``T[r, i, j]`` multiplies active coefficient j to give ``D[r, r - kappa + i]``;
    entries whose column falls outside 0..N-1 are zero.
    """
    n = basis.n
    rows = np.arange(n)[:, None]
    cols = rows - kappa + np.arange(2 * kappa + 1)[None, :]
    valid = (cols >= 0) & (cols < n)
    cols_c = np.clip(cols, 0, n - 1)
    q_idx = basis.q_of(basis.active) + basis.q_max
    l_idx = basis.l_of(basis.active)
    ops = basis.doppler_ops[q_idx[:, None, None], rows[None], cols_c[None]]
    phase = basis.delay_phases[cols_c][..., l_idx]
    t = np.moveaxis(ops, 0, -1) * phase
    return t * valid[..., None]


def channel_mse(estimate, truth):
    """Normalized squared Frobenius error of an estimated channel matrix.

    Accepts CompositeChannel objects or (N, L) tap arrays; tap arrays of
    different delay spans are zero-padded.
    """
    est = getattr(estimate, "taps", estimate)
    ref = getattr(truth, "taps", truth)
    width = max(est.shape[1], ref.shape[1])
    est = np.pad(est, ((0, 0), (0, width - est.shape[1])))
    ref = np.pad(ref, ((0, 0), (0, width - ref.shape[1])))
    return float(np.sum(np.abs(est - ref) ** 2) / np.sum(np.abs(ref) ** 2))
