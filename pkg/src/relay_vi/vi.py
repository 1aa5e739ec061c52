"""Mean-field variational estimation of sparse BEM coefficients, data and noise.

The factors are a complex Gaussian over the active coefficients, independent
Gamma factors over their precisions, a Gamma factor over the noise precision
and a point mass over the data symbols.  Each update below is the exact
minimizer of the free energy in its own block, except the data step which
searches a banded approximation and is accepted only if it does not raise
the exact objective.
"""

import logging
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import viterbi
from .bem import channel_mse, coeffs_to_taps, operator_G
from .initial import project_coeffs
from .ofdm import bit_error_rate
from .special import digamma, gammaln

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
EIG_FLOOR = 1e-14
D_FLOOR = 1e-300
DEFAULT_ORDER = ("channel", "alpha", "data", "noise", "prune")


@dataclass(frozen=True)
class ViHyperParams:
    """Shape/rate of the Gamma priors on coefficient and noise precisions."""

    a: float = 1e-6
    b: float = 1e-6
    c: float = 1e-6
    d: float = 1e-6

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) <= 0:
            raise ValueError("Gamma prior parameters must be positive")


@dataclass(frozen=True)
class Observation:
    y: np.ndarray
    frame: object
    pilots: np.ndarray

    def symbol(self, x_d):
        x = np.zeros(self.frame.n_subcarriers, dtype=complex)
        x[self.frame.pilot_indices] = self.pilots
        x[self.frame.data_indices] = x_d
        return x


@dataclass(frozen=True)
class ViState:
    m_mu: np.ndarray
    sigma_mu: np.ndarray
    a_t: np.ndarray
    b_t: np.ndarray
    c_t: float
    d_t: float
    x_d_hat: np.ndarray
    basis: object

    @property
    def alpha_mean(self):
        return self.a_t / self.b_t

    @property
    def beta_mean(self):
        return self.c_t / self.d_t

    @property
    def second_moment_diag(self):
        return np.abs(self.m_mu) ** 2 + np.real(np.diag(self.sigma_mu))

    @cached_property
    def eig(self):
        """Eigenpairs of sigma_mu with eigenvalues below 1e-14 removed."""
        lam, vec = np.linalg.eigh(self.sigma_mu)
        keep = lam > EIG_FLOOR
        return lam[keep], vec[:, keep]


@dataclass(frozen=True)
class IterationInfo:
    iteration: int
    free_energy: float
    n_active: int
    mse: float = None
    ber: float = None


@dataclass(frozen=True)
class Truth:
    taps: np.ndarray
    x_d: np.ndarray


def seed_state(init, basis, hyper=None):
    """Starting state: equal prior precisions 1/M and the LS noise estimate."""
    hyper = hyper or ViHyperParams()
    m = basis.n_active
    a_t = np.full(m, hyper.a + 1.0)
    c_t = hyper.c + basis.n
    return ViState(
        m_mu=project_coeffs(init, basis),
        sigma_mu=np.eye(m, dtype=complex) / m,
        a_t=a_t,
        b_t=a_t / init.alpha_ratio,
        c_t=c_t,
        d_t=c_t / init.beta_ratio,
        x_d_hat=np.array(init.x_d0, dtype=complex),
        basis=basis,
    )


def _design(state, obs):
    return operator_G(obs.symbol(state.x_d_hat), state.basis)


def _fit_terms(g, y, m, sigma):
    """y^H y - 2 Re{y^H G m} + Tr{G^H G (m m^H + Sigma)}."""
    r = y - g @ m
    return float(np.vdot(r, r).real + np.einsum("ij,jk,ik->", g, sigma, g.conj()).real)


def _data_terms(g, y, m, sigma):
    gm = g @ m
    return float(np.vdot(gm, gm).real + np.einsum("ij,jk,ik->", g, sigma, g.conj()).real
                 - 2.0 * np.real(np.vdot(y, gm)))


def update_channel_posterior(state, obs):
    """Gaussian factor of the coefficients given precisions, data and noise."""
    g = _design(state, obs)
    beta = state.beta_mean
    prec = np.diag(state.alpha_mean).astype(complex) + beta * (g.conj().T @ g)
    prec = 0.5 * (prec + prec.conj().T)
    scale = 1.0 / np.sqrt(np.real(np.diag(prec)))
    scaled = prec * np.outer(scale, scale)
    if np.linalg.cond(scaled) > COND_LIMIT:
        log.info("posterior precision ill-conditioned; adding 1e-12 jitter")
        prec = prec + 1e-12 * np.diag(np.real(np.diag(prec)))
    try:
        factor = cho_factor(prec, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("posterior precision is not positive definite") from exc
    sigma = cho_solve(factor, np.eye(prec.shape[0], dtype=complex))
    sigma = 0.5 * (sigma + sigma.conj().T)
    m = beta * sigma @ (g.conj().T @ obs.y)
    return replace(state, m_mu=m, sigma_mu=sigma)


def update_alpha(state, hyper=None):
    hyper = hyper or ViHyperParams()
    a_t = np.full(state.m_mu.size, hyper.a + 1.0)
    b_t = hyper.b + state.second_moment_diag
    return replace(state, a_t=a_t, b_t=b_t)


def update_noise(state, obs, hyper=None):
    hyper = hyper or ViHyperParams()
    g = _design(state, obs)
    d_t = hyper.d + _fit_terms(g, obs.y, state.m_mu, state.sigma_mu)
    if d_t <= D_FLOOR:
        log.warning("noise rate collapsed to %.3e; clamping", d_t)
        d_t = D_FLOOR
    return replace(state, c_t=hyper.c + obs.y.size, d_t=d_t)


def data_objective(state, obs, x_d=None):
    """Data-dependent part of the free energy, without the c/d factor."""
    x_d = state.x_d_hat if x_d is None else x_d
    g = operator_G(obs.symbol(x_d), state.basis)
    return _data_terms(g, obs.y, state.m_mu, state.sigma_mu)


def banded_set(state, kappa, rel_floor=1e-12):
    lam, vec = state.eig
    return viterbi.from_posterior(state.m_mu, lam, vec, state.basis, kappa, rel_floor)


def update_data(state, obs, kappa, guard=True):
    """Viterbi search for the data symbols.

    With ``guard`` the new symbols are kept only when the exact data
    objective does not increase.
    """
    x_new = viterbi.detect(obs.y, banded_set(state, kappa), obs.frame, obs.pilots)
    if guard and data_objective(state, obs, x_new) > data_objective(state, obs):
        return state
    return replace(state, x_d_hat=x_new)


def prune(state, threshold=1e-10):
    """Drop coefficients whose posterior second moment fell below ``threshold``."""
    keep = state.second_moment_diag >= threshold
    if keep.all():
        return state
    return replace(
        state,
        m_mu=state.m_mu[keep],
        sigma_mu=state.sigma_mu[np.ix_(keep, keep)],
        a_t=state.a_t[keep],
        b_t=state.b_t[keep],
        basis=state.basis.with_active(state.basis.active[keep]),
    )


def _delta_term(state, obs):
    frame = obs.frame
    free = state.x_d_hat[~frame.forced_zero_mask]
    dist = np.min(np.abs(free[:, None] - frame.constellation[None, :]), axis=1, initial=np.inf)
    if free.size and dist.max() > 1e-9:
        raise ValueError("free energy is -inf for off-constellation data")
    return 0.0


def free_energy(state, obs, hyper=None):
    """Closed-form variational free energy (additive constants dropped)."""
    hyper = hyper or ViHyperParams()
    a_t, b_t, c_t, d_t = state.a_t, state.b_t, state.c_t, state.d_t
    n = obs.y.size
    lam = np.linalg.eigvalsh(state.sigma_mu)
    if lam.size and lam.min() <= 0:
        raise ValueError("sigma_mu is not positive definite")
    log_det = float(np.sum(np.log(lam)))
    psi_a = digamma(a_t) - np.log(b_t)
    psi_c = digamma(c_t) - np.log(d_t)
    g = _design(state, obs)

    value = -log_det + float(np.sum(state.alpha_mean * state.second_moment_diag))
    value += float(np.sum(a_t * np.log(b_t) + (a_t - 1) * psi_a - a_t - gammaln(a_t)))
    value -= float(np.sum(hyper.a * np.log(hyper.b) + (hyper.a - 1) * psi_a
                          - hyper.b * a_t / b_t - gammaln(hyper.a)))
    value -= float(np.sum(psi_a))
    value += c_t * np.log(d_t) + (c_t - 1) * psi_c - c_t - gammaln(c_t)
    value += -(hyper.c - 1) * psi_c + hyper.d * c_t / d_t - n * psi_c
    value += c_t / d_t * _fit_terms(g, obs.y, state.m_mu, state.sigma_mu)
    value += _delta_term(state, obs)
    if not np.isfinite(value):
        raise ValueError("non-finite free energy")
    return float(value)


def _info(i, state, obs, hyper, truth, taps=None, x_d=None):
    mse = ber = None
    if truth is not None:
        taps = coeffs_to_taps(state.basis, state.m_mu) if taps is None else taps
        mse = channel_mse(taps, truth.taps)
        ber = bit_error_rate(state.x_d_hat if x_d is None else x_d, truth.x_d, obs.frame)
    return IterationInfo(i, free_energy(state, obs, hyper), state.basis.n_active, mse, ber)


def run(obs, basis, init, n_iters=10, kappa=3, hyper=None, truth=None, callback=None,
        order=DEFAULT_ORDER, prune_threshold=1e-10, guard=True):
    """Iterate the coordinate updates from an LS initialization.

    Parameters
    ----------
    obs : Observation
    basis : BemBasis
        Fine (oversampled) basis to estimate on.
    init : InitBundle
    truth : Truth, optional
        When given, MSE and BER are recorded per iteration.  Iteration 0
        reports the coarse LS channel and quantized LS data.
    callback : callable, optional
        Called as ``callback(info, state)`` after every iteration.

    Returns
    -------
    state : ViState
    history : list of IterationInfo
    """
    hyper = hyper or ViHyperParams()
    steps = {
        "channel": lambda s: update_channel_posterior(s, obs),
        "alpha": lambda s: update_alpha(s, hyper),
        "data": lambda s: update_data(s, obs, kappa, guard),
        "noise": lambda s: update_noise(s, obs, hyper),
        "prune": lambda s: prune(s, prune_threshold),
    }
    unknown = set(order) - set(steps)
    if unknown:
        raise ValueError(f"unknown update steps {sorted(unknown)}")

    state = seed_state(init, basis, hyper)
    info = _info(0, state, obs, hyper, truth,
                 taps=coeffs_to_taps(init.basis, init.mu0), x_d=init.x_d0)
    history = [info]
    if callback:
        callback(info, state)
    for i in range(1, n_iters + 1):
        for name in order:
            state = steps[name](state)
        info = _info(i, state, obs, hyper, truth)
        history.append(info)
        if callback:
            callback(info, state)
    return state, history
