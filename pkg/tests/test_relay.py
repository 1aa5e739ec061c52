import numpy as np
import pytest

from relay_vi.fading import HopChannelRealization, HopChannelSpec
from relay_vi.ofdm import assemble, build_pilot_pattern, dft_matrix, random_data
from relay_vi.relay import (RelaySystem, _stream, composite_channel, hop_matrix, link_matrix,
                            matrix_to_taps, propagate, shift_matrix, taps_to_matrix)

from conftest import crandn

N, CP, TS = 32, 8, 2e-6


def static_system(responses, gains, n=N, cp=CP, noise=0.0):
    hops = tuple(tuple(HopChannelRealization.static(h, -cp, n + cp) for h in link)
                 for link in responses)
    g = np.asarray(gains, dtype=float)
    return RelaySystem(hops, g, np.full(g.shape, noise), noise, n, cp)


def random_system(rng, pools, doppler=0.2, noise=0.0, n=N, cp=CP):
    specs = [[HopChannelSpec.from_pool(p, len(p), doppler) for p in link] for link in pools]
    return RelaySystem.draw(specs, noise, n, cp, TS, rng)


def stream_operator(system):
    """Time-domain map of the noiseless sample simulator, one unit vector at a time."""
    n, cp = system.n_subcarriers, system.cp_len
    zeros_r = [[np.zeros(n + cp)] * (system.n_hops - 1) for _ in range(system.n_links)]
    cols = []
    for j in range(n):
        s = np.eye(n)[j].astype(complex)
        cols.append(_stream(system, np.concatenate([s[n - cp:], s]), zeros_r,
                            np.zeros(n + cp, dtype=complex)))
    return np.stack(cols, axis=1)


class TestHopMatrix:
    def test_identity_tap(self):
        hop = HopChannelRealization.static([1.0], 0, 6)
        np.testing.assert_array_equal(hop_matrix(hop, 6, 0), np.eye(6))

    def test_impulse_response(self):
        h = np.array([0.8, -0.3j])
        hop = HopChannelRealization.static(h, -1, 7)
        m = hop_matrix(hop, 6, 0)
        assert m.shape == (6, 7)
        impulse = np.zeros(7)
        impulse[1] = 1.0  # input time 0
        np.testing.assert_allclose(m @ impulse, np.r_[h, np.zeros(4)])

    def test_chained_static_is_convolution(self, rng):
        h1, h2 = crandn(rng, 3), crandn(rng, 4)
        hops = [HopChannelRealization.static(h, -10, 30) for h in (h1, h2)]
        prod = link_matrix(hops, 12)
        # row r is output time r, column c is input time c - 5
        ref = np.convolve(h1, h2)
        for r in range(12):
            np.testing.assert_allclose(prod[r, r:r + 6][::-1], ref, atol=1e-12)

    def test_span_checked(self, rng):
        hop = HopChannelRealization.static([1.0, 0.5], 0, 4)
        with pytest.raises(ValueError):
            hop_matrix(hop, 4, -1)


class TestCompositeChannel:
    def test_identity_hops(self):
        system = static_system([[[1.0], [1.0]]], [[0.6]])
        np.testing.assert_allclose(composite_channel(system).matrix, 0.6 * np.eye(N))

    def test_static_is_circular_convolution(self, rng):
        h1, h2, h3 = crandn(rng, 3), crandn(rng, 2), crandn(rng, 4)
        g = np.array([[0.7, 0.9]])
        system = static_system([[h1, h2, h3]], g)
        taps = np.convolve(np.convolve(h1, h2), h3) * 0.7 * 0.9
        ref = sum(t * shift_matrix(N, l) for l, t in enumerate(taps))
        out = composite_channel(system)
        np.testing.assert_allclose(out.matrix, ref, atol=1e-12)
        np.testing.assert_allclose(out.taps[0, :taps.size], taps, atol=1e-12)

    @pytest.mark.parametrize("pools", [
        [[[0, 1, 2], [0, 2]], [[0, 1], [1, 3]]],
        [[[0, 1], [0, 1, 2], [0, 1]], [[0, 1, 2], [0, 1], [0, 1]]],
    ])
    def test_time_varying_matches_stream(self, rng, pools):
        system = random_system(rng, pools)
        np.testing.assert_allclose(composite_channel(system).matrix, stream_operator(system),
                                   atol=1e-10)

    def test_length_formula(self):
        specs = [[HopChannelSpec.from_pool([0, 1, 2, 3, 4], 2, 0.05),
                  HopChannelSpec.from_pool([0, 1, 2, 3], 2, 0.15)]]
        system = RelaySystem.draw(specs, 0.1, 128, 8, TS, np.random.default_rng(0))
        assert system.composite_length == 5 + 4 - 1 == 8

    def test_cp_overflow_rejected(self):
        with pytest.raises(ValueError):
            static_system([[np.ones(5), np.ones(5)]], [[1.0]], cp=8)

    def test_single_hop_rejected(self):
        with pytest.raises(ValueError):
            static_system([[[1.0]]], np.zeros((1, 0)))

    def test_nonpositive_gain_rejected(self):
        with pytest.raises(ValueError):
            static_system([[[1.0], [1.0]]], [[0.0]])

    def test_taps_reproduce_matrix(self, rng):
        out = composite_channel(random_system(rng, [[[0, 1, 2], [0, 1]]]))
        np.testing.assert_allclose(taps_to_matrix(out.taps), out.matrix, atol=1e-12)
        np.testing.assert_allclose(matrix_to_taps(out.matrix, CP), out.taps)

    def test_static_frequency_matrix_diagonal(self, rng):
        out = composite_channel(static_system([[crandn(rng, 3), crandn(rng, 3)]], [[0.8]]))
        d = out.freq_matrix()
        assert np.max(np.abs(d - np.diag(np.diag(d)))) < 1e-10

    def test_grouping_independent(self, rng):
        system = random_system(rng, [[[0, 1], [0, 1, 2], [0, 1]]])
        first, middle, last = system.hops[0]
        c = hop_matrix(last, N, 0)
        b = hop_matrix(middle, N + 1, -1)
        a = hop_matrix(first, N + 3, -3)
        left = (c @ b) @ a
        right = c @ (b @ a)
        np.testing.assert_allclose(left, right, atol=1e-10)


class TestPropagate:
    def test_identity_noiseless(self, rng):
        system = static_system([[[1.0], [1.0]]], [[0.5]])
        spec, pilots = build_pilot_pattern(N, 4, 0)
        x = assemble(spec, random_data(spec, rng), pilots)
        y, _, v = propagate(x, system, rng)
        np.testing.assert_allclose(y, 0.5 * x.values, atol=1e-12)
        assert not np.any(v)

    def test_received_model_exact(self, rng):
        system = random_system(rng, [[[0, 1, 2], [0, 2]], [[0, 1], [1, 3]]], noise=0.05)
        spec, pilots = build_pilot_pattern(N, 4, 0)
        x = assemble(spec, random_data(spec, rng), pilots).values
        y, truth, v = propagate(x, system, rng)
        f = dft_matrix(N)
        np.testing.assert_allclose(y - f @ truth.matrix @ f.conj().T @ x, v, atol=1e-10)
        assert np.linalg.norm(v) > 0

    def test_composite_noise_variance(self, rng):
        relay_noise, dest_noise, g = 0.2, 0.1, 0.7 - 0.4j
        hops = ((HopChannelRealization.static([1.0], -CP, N + CP),
                 HopChannelRealization.static([g], -CP, N + CP)),)
        system = RelaySystem(hops, [[1.0]], [[relay_noise]], dest_noise, N, CP)
        x = np.zeros(N)
        v = np.concatenate([propagate(x, system, rng)[2] for _ in range(10_000)])
        expected = relay_noise * abs(g) ** 2 + dest_noise
        assert abs(np.mean(np.abs(v) ** 2) / expected - 1.0) < 0.05

    def test_default_gain(self, rng):
        specs = [[HopChannelSpec.from_pool([0], 1, 0.0)] * 2]
        system = RelaySystem.draw(specs, 0.25, N, CP, TS, rng)
        assert np.isclose(system.gains[0, 0], 1 / np.sqrt(1.25))
        assert system.dest_noise_power == system.relay_noise_powers[0, 0] == 0.25
