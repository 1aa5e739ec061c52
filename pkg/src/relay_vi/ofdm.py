"""Single-symbol OFDM framing: pilot clusters, pilot/data multiplexing,
unitary DFT modulation and cyclic prefix handling."""

from dataclasses import dataclass, field

import numpy as np

QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0)


def qpsk_bits(symbols):
    """Gray-mapped bit pairs of QPSK symbols, shape (len, 2).

    Zeros map to the bits of the first constellation point, so forced-zero
    positions should be excluded before counting errors.
    """
    s = np.asarray(symbols)
    return np.stack([s.real < 0, s.imag < 0], axis=-1).astype(np.int8)


@dataclass(frozen=True)
class OfdmFrameSpec:
    """Subcarrier layout of one OFDM symbol.

    Parameters
    ----------
    n_subcarriers : int
        DFT size N.
    cp_len : int
        Cyclic prefix length in samples.
    pilot_indices, data_indices : ndarray of int
        Disjoint, sorted index sets partitioning ``range(n_subcarriers)``.
    zero_edge_count : int
        Data subcarriers within this many positions of either band edge are
        transmitted as zeros and treated as known symbols by every detector.
    constellation : ndarray of complex
        Unit average power symbol alphabet; order fixes quantizer tie-breaks.
    """

    n_subcarriers: int
    cp_len: int
    pilot_indices: np.ndarray
    data_indices: np.ndarray
    zero_edge_count: int = 0
    constellation: np.ndarray = field(default_factory=lambda: QPSK.copy())

    def __post_init__(self):
        n = self.n_subcarriers
        p = np.asarray(self.pilot_indices, dtype=int)
        d = np.asarray(self.data_indices, dtype=int)
        object.__setattr__(self, "pilot_indices", p)
        object.__setattr__(self, "data_indices", d)
        if n <= 0 or self.cp_len <= 0:
            raise ValueError("n_subcarriers and cp_len must be positive")
        if np.intersect1d(p, d).size:
            raise ValueError("pilot and data index sets overlap")
        if not np.array_equal(np.union1d(p, d), np.arange(n)):
            raise ValueError("pilot and data indices must partition the band")
        if self.zero_edge_count < 0 or 2 * self.zero_edge_count > n:
            raise ValueError("invalid zero_edge_count")
        c = np.asarray(self.constellation, dtype=complex)
        if not np.isclose(np.mean(np.abs(c) ** 2), 1.0):
            raise ValueError("constellation must have unit average power")
        object.__setattr__(self, "constellation", c)

    @property
    def n_pilots(self):
        return self.pilot_indices.size

    @property
    def n_data(self):
        return self.data_indices.size

    @property
    def forced_zero_mask(self):
        """Boolean mask over data positions that are forced to zero."""
        k = self.zero_edge_count
        d = self.data_indices
        return (d < k) | (d >= self.n_subcarriers - k)

    @property
    def free_data_indices(self):
        """Subcarriers carrying unknown constellation symbols."""
        return self.data_indices[~self.forced_zero_mask]

    def with_zero_edges(self, kappa):
        return OfdmFrameSpec(self.n_subcarriers, self.cp_len, self.pilot_indices,
                             self.data_indices, kappa, self.constellation)

    def pilot_matrix(self):
        """Dense E_p (N x N_p); used only by tests and oracles."""
        e = np.zeros((self.n_subcarriers, self.n_pilots))
        e[self.pilot_indices, np.arange(self.n_pilots)] = 1.0
        return e

    def data_matrix(self):
        """Dense E_d (N x N_d)."""
        e = np.zeros((self.n_subcarriers, self.n_data))
        e[self.data_indices, np.arange(self.n_data)] = 1.0
        return e


@dataclass(frozen=True)
class FreqSymbol:
    values: np.ndarray
    known_mask: np.ndarray


def cluster_starts(n_subcarriers, n_clusters):
    return [(c * n_subcarriers) // n_clusters for c in range(n_clusters)]


def build_pilot_pattern(n_subcarriers, n_clusters, rng_seed, pilot_power_ratio=3.0,
                        cp_len=8, zero_edge_count=0, constellation=None):
    """Equal-spaced three-subcarrier pilot clusters.

    Each cluster is ``[0, p, 0]`` with ``p ~ CN(0, pilot_power_ratio)``;
    cluster ``c`` starts at ``floor(c * N / n_clusters)``.

    Returns
    -------
    spec : OfdmFrameSpec
    pilots : ndarray of complex, length ``3 * n_clusters``
        Pilot values in ``spec.pilot_indices`` order.
    """
    if n_clusters <= 0:
        raise ValueError("n_clusters must be positive")
    if 3 * n_clusters > n_subcarriers:
        raise ValueError("pilot clusters overlap: 3 * n_clusters > n_subcarriers")
    starts = cluster_starts(n_subcarriers, n_clusters)
    pilot_idx = np.array([s + k for s in starts for k in range(3)])
    if np.unique(pilot_idx).size != pilot_idx.size:
        raise ValueError("pilot clusters overlap")
    data_idx = np.setdiff1d(np.arange(n_subcarriers), pilot_idx)
    kwargs = {} if constellation is None else {"constellation": constellation}
    spec = OfdmFrameSpec(n_subcarriers, cp_len, pilot_idx, data_idx, zero_edge_count, **kwargs)

    rng = np.random.default_rng(rng_seed)
    centers = rng.standard_normal((n_clusters, 2)) @ np.array([1.0, 1j])
    centers *= np.sqrt(pilot_power_ratio / 2.0)
    pilots = np.zeros(pilot_idx.size, dtype=complex)
    pilots[1::3] = centers
    return spec, pilots


def assemble(spec, data, pilots):
    """Scatter data and pilot symbols onto their subcarriers."""
    data = np.asarray(data, dtype=complex)
    pilots = np.asarray(pilots, dtype=complex)
    if data.shape != (spec.n_data,) or pilots.shape != (spec.n_pilots,):
        raise ValueError(f"expected {spec.n_data} data and {spec.n_pilots} pilot symbols, "
                         f"got {data.shape} and {pilots.shape}")
    x = np.zeros(spec.n_subcarriers, dtype=complex)
    x[spec.data_indices] = np.where(spec.forced_zero_mask, 0.0, data)
    x[spec.pilot_indices] = pilots
    known = np.zeros(spec.n_subcarriers, dtype=bool)
    known[spec.pilot_indices] = True
    known[spec.data_indices[spec.forced_zero_mask]] = True
    return FreqSymbol(x, known)


def modulate(x, cp_len):
    """IDFT (unitary) and cyclic prefix insertion; returns N + cp_len samples."""
    values = x.values if isinstance(x, FreqSymbol) else np.asarray(x)
    s = np.fft.ifft(values, norm="ortho")
    if cp_len > s.size:
        raise ValueError("cyclic prefix longer than the symbol")
    return np.concatenate([s[s.size - cp_len:], s])


def strip_cp(samples, cp_len):
    return np.asarray(samples)[cp_len:]


def demodulate(y_time):
    """Unitary DFT of a CP-free received block."""
    return np.fft.fft(np.asarray(y_time), norm="ortho")


def dft_matrix(n):
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def random_data(spec, rng):
    """Uniform constellation symbols for every data position (edges zeroed)."""
    idx = rng.integers(0, spec.constellation.size, spec.n_data)
    d = spec.constellation[idx]
    d[spec.forced_zero_mask] = 0.0
    return d


def bit_error_rate(detected, transmitted, spec):
    """QPSK bit error rate over data subcarriers that are not forced to zero."""
    keep = ~spec.forced_zero_mask
    if not keep.any():
        return 0.0
    a = qpsk_bits(np.asarray(detected)[keep])
    b = qpsk_bits(np.asarray(transmitted)[keep])
    return float(np.mean(a != b))
