"""Multihop amplify-and-forward propagation and the composite channel."""

from dataclasses import dataclass

import numpy as np

from .fading import draw_hop
from .ofdm import demodulate, modulate


@dataclass(frozen=True)
class RelaySystem:
    """K parallel links of ``n_hops`` hops each.

    ``hops[k][rho]`` is the realization of hop ``rho`` (0-based, source side
    first) on link ``k``; ``gains[k][rho]`` and ``relay_noise_powers[k][rho]``
    belong to the relay at the end of hop ``rho`` for ``rho < n_hops - 1``.
    """

    hops: tuple
    gains: np.ndarray
    relay_noise_powers: np.ndarray
    dest_noise_power: float
    n_subcarriers: int
    cp_len: int

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float).reshape(self.n_links, self.n_hops - 1)
        w = np.asarray(self.relay_noise_powers, dtype=float).reshape(g.shape)
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "relay_noise_powers", w)
        if self.n_hops < 2:
            raise ValueError("at least one relay (two hops) per link is required")
        if any(len(link) != self.n_hops for link in self.hops):
            raise ValueError("every link must have the same number of hops")
        if np.any(g <= 0):
            raise ValueError("amplification gains must be positive")
        if self.composite_length > self.cp_len:
            raise ValueError(f"composite channel length {self.composite_length} "
                             f"exceeds the cyclic prefix ({self.cp_len})")

    @property
    def n_links(self):
        return len(self.hops)

    @property
    def n_hops(self):
        return len(self.hops[0])

    def link_length(self, k):
        return sum(h.max_delay for h in self.hops[k]) - (self.n_hops - 1)

    @property
    def composite_length(self):
        return max(self.link_length(k) for k in range(self.n_links))

    @classmethod
    def draw(cls, link_specs, noise_power, n_subcarriers, cp_len, sample_interval, rng,
             gains=None):
        """Random system with equal noise power at every receiver.

        ``link_specs[k]`` lists the HopChannelSpec of each hop on link k.  The
        default relay gain 1/sqrt(1 + noise_power) keeps the relay output at
        unit average power for unit-power input and channels.
        """
        n_time = n_subcarriers + cp_len
        hops = tuple(
            tuple(draw_hop(spec, n_time, -cp_len, rng, n_subcarriers, sample_interval)
                  for spec in specs)
            for specs in link_specs
        )
        shape = (len(link_specs), len(link_specs[0]) - 1)
        if gains is None:
            gains = np.full(shape, 1.0 / np.sqrt(1.0 + noise_power))
        return cls(hops, gains, np.full(shape, noise_power), noise_power, n_subcarriers, cp_len)


@dataclass(frozen=True)
class CompositeChannel:
    """End-to-end channel after CP removal.

    ``taps[n, l]`` is the composite gain at time n and delay l, so that
    ``matrix == sum_l diag(taps[:, l]) P(l)``.
    """

    taps: np.ndarray
    matrix: np.ndarray

    def freq_matrix(self):
        """F H F^H, the frequency-domain channel matrix."""
        h = np.fft.fft(self.matrix, axis=0, norm="ortho")
        return np.fft.ifft(h, axis=1, norm="ortho")


def shift_matrix(n, l):
    """Cyclic delay P(l): (P(l) s)[t] = s[(t - l) mod n]."""
    return np.roll(np.eye(n), l, axis=0)


def taps_to_matrix(taps):
    n, n_delay = taps.shape
    h = np.zeros((n, n), dtype=complex)
    rows = np.arange(n)
    for l in range(n_delay):
        h[rows, (rows - l) % n] += taps[:, l]
    return h


def matrix_to_taps(h, n_delay):
    n = h.shape[0]
    rows = np.arange(n)
    return np.stack([h[rows, (rows - l) % n] for l in range(n_delay)], axis=1)


def hop_matrix(hop, n_rows, row_time_offset):
    """Linear time-varying convolution matrix of one hop.

    Row r is output time ``row_time_offset + r``; column c is input time
    ``row_time_offset - (L - 1) + c``.  Shape ``(n_rows, n_rows + L - 1)``.
    """
    n_delay = hop.max_delay
    coeff = hop.coefficients(row_time_offset + np.arange(n_rows))
    m = np.zeros((n_rows, n_rows + n_delay - 1), dtype=complex)
    rows = np.arange(n_rows)
    for l in range(n_delay):
        m[rows, rows + n_delay - 1 - l] = coeff[:, l]
    return m


def link_matrix(hops, n_subcarriers):
    """Product H_{last} ... H_{first} with output rows at times 0..N-1."""
    n_rows, t0 = n_subcarriers, 0
    product = None
    for hop in reversed(hops):
        m = hop_matrix(hop, n_rows, t0)
        product = m if product is None else product @ m
        t0 -= hop.max_delay - 1
        n_rows += hop.max_delay - 1
    return product


def cp_map(n_subcarriers, length):
    """E_k: expands an N-sample block to times -(length-1)..N-1 via the CP."""
    e = np.zeros((n_subcarriers + length - 1, n_subcarriers))
    times = np.arange(-(length - 1), n_subcarriers)
    e[np.arange(times.size), times % n_subcarriers] = 1.0
    return e


def composite_channel(system):
    n = system.n_subcarriers
    h = np.zeros((n, n), dtype=complex)
    for k, link in enumerate(system.hops):
        gain = np.prod(system.gains[k])
        h += gain * link_matrix(link, n) @ cp_map(n, system.link_length(k))
    return CompositeChannel(matrix_to_taps(h, system.cp_len), h)


def _convolve(hop, signal, times):
    coeff = hop.coefficients(times)
    out = np.zeros(signal.size, dtype=complex)
    for l in range(hop.max_delay):
        out[l:] += coeff[l:, l] * signal[:signal.size - l]
    return out


def _stream(system, samples, relay_noise, dest_noise):
    times = np.arange(-system.cp_len, system.n_subcarriers)
    received = dest_noise.copy()
    for k, link in enumerate(system.hops):
        sig = samples
        for rho, hop in enumerate(link):
            sig = _convolve(hop, sig, times)
            if rho < system.n_hops - 1:
                sig = system.gains[k, rho] * (sig + relay_noise[k][rho])
        received = received + sig
    return received[system.cp_len:]


def _cn(rng, power, n):
    return np.sqrt(power / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def propagate(x, system, rng):
    """Send one OFDM symbol through the relay network.

    Samples are pushed hop by hop with AWGN added at every relay and at the
    destination.  The CP is removed and the block is transformed to the
    frequency domain.

    Returns
    -------
    y : ndarray
        Received frequency-domain symbol.
    truth : CompositeChannel
    v : ndarray
        Realized composite noise in the frequency domain, y = F H F^H x + v.
    """
    n_time = system.n_subcarriers + system.cp_len
    relay_noise = [[_cn(rng, system.relay_noise_powers[k, rho], n_time)
                    for rho in range(system.n_hops - 1)] for k in range(system.n_links)]
    dest_noise = _cn(rng, system.dest_noise_power, n_time)
    s = modulate(x, system.cp_len)
    y_time = _stream(system, s, relay_noise, dest_noise)
    v_time = _stream(system, np.zeros_like(s), relay_noise, dest_noise)
    return demodulate(y_time), composite_channel(system), demodulate(v_time)
