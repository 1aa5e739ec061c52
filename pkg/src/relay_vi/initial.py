"""Pilot-based starting point for the variational iterations.

A coarse V = 1 expansion is fitted to the pilot subcarriers by least squares,
the data are equalized by least squares and quantized, and the residual
power seeds the noise precision.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .bem import coeffs_to_taps, operator_D, operator_G, taps_to_coeffs

log = logging.getLogger(__name__)

COND_LIMIT = 1e10
RIDGE = 1e-8


@dataclass(frozen=True)
class InitBundle:
    mu0: np.ndarray
    basis: object
    x_d0: np.ndarray
    noise_power0: float
    alpha_ratio: float
    beta_ratio: float


def _solve_normal(a, b):
    """Solve (a^H a) z = a^H b, adding a small ridge when ill-conditioned."""
    gram = a.conj().T @ a
    rhs = a.conj().T @ b
    if gram.size == 0:
        return np.zeros(0, dtype=complex)
    if np.linalg.cond(gram) > COND_LIMIT:
        scale = max(np.real(np.trace(gram)) / gram.shape[0], np.finfo(float).tiny)
        log.warning("ill-conditioned normal equations; adding ridge %.1e", RIDGE * scale)
        gram = gram + RIDGE * scale * np.eye(gram.shape[0])
    return np.linalg.solve(gram, rhs)


def pilot_symbol(frame, pilots):
    x = np.zeros(frame.n_subcarriers, dtype=complex)
    x[frame.pilot_indices] = pilots
    return x


def ls_channel(y, frame, pilots, basis):
    """LS fit of the coefficients on the pilot rows, ignoring data leakage."""
    rows = frame.pilot_indices
    gp = operator_G(pilot_symbol(frame, pilots), basis)[rows]
    return _solve_normal(gp, np.asarray(y)[rows])


def ls_equalize(y, mu, frame, pilots, basis):
    """LS estimate of the data symbols given a channel; forced edges stay zero."""
    d = operator_D(mu, basis)
    free = frame.free_data_indices
    rhs = np.asarray(y) - d @ pilot_symbol(frame, pilots)
    est = _solve_normal(d[:, free], rhs)
    out = np.zeros(frame.n_data, dtype=complex)
    out[~frame.forced_zero_mask] = est
    return out


def quantize(values, constellation):
    """Nearest constellation point; ties go to the lowest constellation index."""
    v = np.asarray(values)
    dist = np.abs(v[..., None] - np.asarray(constellation)) ** 2
    return np.asarray(constellation)[np.argmin(dist, axis=-1)]


def estimate_noise_power(y, x, mu, basis):
    """Mean squared residual ||y - G[x] mu||^2 / N."""
    values = getattr(x, "values", x)
    r = np.asarray(y) - operator_G(values, basis) @ mu
    return float(np.vdot(r, r).real / r.size)


def initialize(y, frame, pilots, basis):
    """Run the pilot LS chain and return the starting bundle."""
    mu = ls_channel(y, frame, pilots, basis)
    x_hat = ls_equalize(y, mu, frame, pilots, basis)
    x_d = quantize(x_hat, frame.constellation)
    x_d[frame.forced_zero_mask] = 0.0
    x = pilot_symbol(frame, pilots)
    x[frame.data_indices] = x_d
    noise = max(estimate_noise_power(y, x, mu, basis), np.finfo(float).tiny)
    return InitBundle(mu, basis, x_d, noise, 1.0 / basis.n_active, 1.0 / noise)


def project_coeffs(init, basis):
    """Refit the coarse initial tap trajectories onto ``basis``."""
    return taps_to_coeffs(basis, coeffs_to_taps(init.basis, init.mu0))
