"""Fast oracle checks that can run from an installed package.

Each check compares a library routine against an independent construction
(dense matrices, exhaustive search, ``math.lgamma``) and returns the largest
discrepancy.  The full suites live under ``tests/``.
"""

import itertools
import math

import numpy as np

from . import viterbi, vi
from .bem import make_basis, operator_D, operator_G
from .fading import HopChannelRealization, HopChannelSpec
from .initial import initialize
from .ofdm import OfdmFrameSpec, assemble, build_pilot_pattern, dft_matrix, random_data
from .relay import RelaySystem, composite_channel, propagate, shift_matrix
from .special import digamma, gammaln


def check_operator_identity(rng):
    basis = make_basis(32, 4, 0.5, 4)
    mu = rng.standard_normal(basis.n_active) + 1j * rng.standard_normal(basis.n_active)
    x = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    return float(np.max(np.abs(operator_D(mu, basis) @ x - operator_G(x, basis) @ mu)))


def check_composite_static(rng):
    n, cp = 16, 4
    h1 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    h2 = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    hops = ((HopChannelRealization.static(h1, -cp, n + cp),
             HopChannelRealization.static(h2, -cp, n + cp)),)
    system = RelaySystem(hops, [[0.7]], [[0.0]], 0.0, n, cp)
    circ = [sum(g * shift_matrix(n, l) for l, g in enumerate(h)) for h in (h1, h2)]
    return float(np.max(np.abs(composite_channel(system).matrix - 0.7 * circ[1] @ circ[0])))


def check_propagation(rng):
    specs = [[HopChannelSpec.from_pool([0, 1, 2], 2, 0.1),
              HopChannelSpec.from_pool([0, 1], 2, 0.2)]]
    system = RelaySystem.draw(specs, 0.01, 32, 8, 2e-6, rng)
    frame, pilots = build_pilot_pattern(32, 4, rng.integers(2**31), cp_len=8)
    x = assemble(frame, random_data(frame, rng), pilots).values
    y, truth, v = propagate(x, system, rng)
    f = dft_matrix(32)
    return float(np.max(np.abs(y - f @ truth.matrix @ f.conj().T @ x - v)))


def check_viterbi_exhaustive(rng):
    n, kappa = 10, 1
    frame = OfdmFrameSpec(n, 2, np.array([0, 5]), np.setdiff1d(np.arange(n), [0, 5]), 1)
    pilots = np.array([1.0, -1.0j])
    d = sum(np.diag(rng.standard_normal(n - abs(k)) + 1j * rng.standard_normal(n - abs(k)), k)
            for k in (-1, 0, 1))
    dj = np.diag(rng.standard_normal(n) + 0j)
    spread = [(0.3, dj)]
    y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    banded = viterbi.from_dense(d, kappa, spread)
    got = viterbi.detect(y, banded, frame, pilots)

    free = frame.free_data_indices
    best, best_val = None, np.inf
    for combo in itertools.product(frame.constellation, repeat=free.size):
        x = np.zeros(n, dtype=complex)
        x[frame.pilot_indices] = pilots
        x[free] = combo
        val = viterbi.dense_objective(x, d, y, spread)
        if val < best_val:
            best, best_val = x, val
    return float(np.max(np.abs(got - best[frame.data_indices])))


def check_special_functions(rng):
    xs = rng.uniform(0.05, 50.0, 20)
    err = max(abs(gammaln(x) - math.lgamma(x)) for x in xs)
    # psi(x + 1) - psi(x) = 1 / x
    err = max(err, float(np.max(np.abs(digamma(xs + 1) - digamma(xs) - 1 / xs))))
    return max(err, abs(float(digamma(1.0)) + 0.57721566490153286))


def check_free_energy_descent(rng):
    specs = [[HopChannelSpec.from_pool([0, 1], 2, 0.05),
              HopChannelSpec.from_pool([0, 1], 2, 0.1)]]
    system = RelaySystem.draw(specs, 0.01, 64, 4, 2e-6, rng)
    frame, pilots = build_pilot_pattern(64, 8, rng.integers(2**31), cp_len=4, zero_edge_count=2)
    x_d = random_data(frame, rng)
    y, _, _ = propagate(assemble(frame, x_d, pilots), system, rng)
    init = initialize(y, frame, pilots, make_basis(64, 1, 0.3, 4))
    obs = vi.Observation(y, frame, pilots)
    state = vi.seed_state(init, make_basis(64, 4, 0.3, 4))
    worst = -np.inf
    before = vi.free_energy(state, obs)
    for step in (lambda s: vi.update_channel_posterior(s, obs), vi.update_alpha,
                 lambda s: vi.update_data(s, obs, 2), lambda s: vi.update_noise(s, obs)) * 2:
        state = step(state)
        after = vi.free_energy(state, obs)
        worst = max(worst, (after - before) / abs(before))
        before = after
    return max(worst, 0.0)


CHECKS = (
    ("operator identity D[mu]x = G[x]mu", check_operator_identity, 1e-10),
    ("static composite equals circulant product", check_composite_static, 1e-12),
    ("propagation matches F H F^H x + v", check_propagation, 1e-10),
    ("Viterbi equals exhaustive search", check_viterbi_exhaustive, 0.0),
    ("digamma and log-gamma identities", check_special_functions, 1e-12),
    ("free energy never increases", check_free_energy_descent, 1e-8),
)


def run_selftest(seed=0, out=print):
    """Run every check; returns True when all pass."""
    ok = True
    for i, (name, check, tol) in enumerate(CHECKS):
        err = check(np.random.default_rng([seed, i]))
        passed = err <= tol
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name}  (error {err:.2e}, tol {tol:.0e})")
    return ok
