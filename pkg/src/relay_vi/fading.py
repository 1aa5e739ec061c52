"""Per-hop doubly-selective Rayleigh channels with Jakes tap correlation."""

from dataclasses import dataclass

import numpy as np
from scipy.special import j0


@dataclass(frozen=True)
class HopChannelSpec:
    """Statistical description of one hop.

    ``max_norm_doppler`` is the largest per-tap Doppler shift normalized to the
    subcarrier spacing, i.e. ``N * f_d * T_s``.
    """

    max_delay: int
    n_taps: int
    tap_position_pool: tuple
    max_norm_doppler: float

    def __post_init__(self):
        pool = tuple(sorted(set(int(p) for p in self.tap_position_pool)))
        object.__setattr__(self, "tap_position_pool", pool)
        if not pool:
            raise ValueError("empty tap position pool")
        if pool[0] < 0 or pool[-1] >= self.max_delay:
            raise ValueError("tap positions must lie in [0, max_delay)")
        if not 1 <= self.n_taps <= len(pool):
            raise ValueError("n_taps must be between 1 and the pool size")
        if self.max_norm_doppler < 0:
            raise ValueError("max_norm_doppler must be non-negative")

    @classmethod
    def from_pool(cls, pool, n_taps, max_norm_doppler):
        pool = tuple(pool)
        return cls(max(pool) + 1, n_taps, pool, max_norm_doppler)


@dataclass(frozen=True)
class Tap:
    delay: int
    doppler: float
    trajectory: np.ndarray


@dataclass(frozen=True)
class HopChannelRealization:
    """Sampled tap trajectories covering times ``time_offset .. time_offset + n_time - 1``."""

    max_delay: int
    taps: tuple
    time_offset: int
    n_time: int

    def coefficients(self, times):
        """Tap gains h(t, l) as an array of shape (len(times), max_delay)."""
        times = np.asarray(times)
        idx = times - self.time_offset
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_time):
            raise ValueError("requested times outside the simulated trajectory span")
        h = np.zeros((idx.size, self.max_delay), dtype=complex)
        for tap in self.taps:
            h[:, tap.delay] += tap.trajectory[idx]
        return h

    @classmethod
    def static(cls, impulse_response, time_offset, n_time):
        """Time-invariant channel; handy for tests and flat-channel checks."""
        taps = tuple(Tap(l, 0.0, np.full(n_time, g, dtype=complex))
                     for l, g in enumerate(impulse_response) if g != 0)
        return cls(len(impulse_response), taps, time_offset, n_time)


def jakes_covariance(f_d, n, sample_interval):
    lags = np.arange(n)
    r = j0(2.0 * np.pi * f_d * lags * sample_interval)
    return r[np.abs(lags[:, None] - lags[None, :])]


def sample_trajectory(f_d, power, n, sample_interval, rng):
    """Zero-mean circular Gaussian sequence with covariance power * J0(2 pi f_d tau T_s).

    The Toeplitz covariance is factorized by eigendecomposition with negative
    eigenvalues clipped to zero, then used to color white noise.
    """
    if f_d < 0 or power <= 0:
        raise ValueError("need f_d >= 0 and power > 0")
    w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    if f_d == 0:
        return np.full(n, np.sqrt(power) * w[0])
    lam, vec = np.linalg.eigh(jakes_covariance(f_d, n, sample_interval))
    color = vec * np.sqrt(np.clip(lam, 0.0, None))
    return np.sqrt(power) * (color @ w)


def exponential_pdp(n_taps):
    p = np.exp(-np.arange(n_taps, dtype=float))
    return p / p.sum()


def draw_hop(spec, n_time, time_offset, rng, n_subcarriers, sample_interval):
    """Draw tap positions, Doppler shifts and trajectories for one hop.

    Positions are sampled without replacement from the pool.  One tap picked
    uniformly gets the maximum Doppler; the rest are uniform on [0, max].
    Powers decay as exp(-i) over the delay-ordered taps, normalized to 1.
    """
    if n_time < 1:
        raise ValueError("n_time must be >= 1")
    positions = np.sort(rng.choice(np.array(spec.tap_position_pool), spec.n_taps, replace=False))
    norm_dopplers = rng.uniform(0.0, spec.max_norm_doppler, spec.n_taps)
    norm_dopplers[rng.integers(spec.n_taps)] = spec.max_norm_doppler
    dopplers = norm_dopplers / (n_subcarriers * sample_interval)
    powers = exponential_pdp(spec.n_taps)
    taps = tuple(
        Tap(int(l), float(f), sample_trajectory(f, p, n_time, sample_interval, rng))
        for l, f, p in zip(positions, dopplers, powers)
    )
    return HopChannelRealization(spec.max_delay, taps, time_offset, n_time)
