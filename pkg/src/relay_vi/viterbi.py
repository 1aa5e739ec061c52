"""Pilot-aware Viterbi search over a banded frequency-domain channel.

The objective is

    x^H B0^H B0 x + sum_j lam_j x^H Bj^H Bj x - 2 Re{y^H B0 x}

where B0 and Bj keep the 2*kappa+1 central diagonals of D[m] and D[xi_j]
(no cyclic wrap).  Row r of every matrix touches only x[r-kappa..r+kappa],
so the objective splits into per-row branch metrics; trellis step n scores
row n - kappa with the window x[n-2kappa..n].
"""

from dataclasses import dataclass, field

import numpy as np

from .bem import band_tensor


@dataclass(frozen=True)
class BandedSet:
    """Band rows of the mean channel and of each posterior eigen-direction.

    ``center[r, i]`` holds ``D[r, r - kappa + i]``; ``spread`` is a list of
    ``(lam, rows)`` with rows laid out the same way.
    """

    kappa: int
    center: np.ndarray
    spread: list = field(default_factory=list)

    @property
    def n(self):
        return self.center.shape[0]

    def row_grams(self):
        """Per-row Hermitian forms A_r with |c w|^2 + sum lam |s w|^2 = w^H A_r w."""
        c = self.center
        grams = np.einsum("ri,rk->rik", c.conj(), c)
        if self.spread:
            lam = np.array([s[0] for s in self.spread])
            rows = np.stack([s[1] for s in self.spread])
            grams = grams + np.einsum("j,jri,jrk->rik", lam, rows.conj(), rows)
        return grams


def banded_projection(d, kappa):
    """Zero every entry of ``d`` farther than ``kappa`` from the main diagonal."""
    n = d.shape[0]
    idx = np.arange(n)
    mask = np.abs(idx[:, None] - idx[None, :]) <= kappa
    return np.where(mask, d, 0)


def band_rows(d, kappa):
    """Row-aligned band storage of a dense matrix, shape (N, 2*kappa+1)."""
    n = d.shape[0]
    cols = np.arange(n)[:, None] - kappa + np.arange(2 * kappa + 1)[None, :]
    valid = (cols >= 0) & (cols < n)
    out = d[np.arange(n)[:, None], np.clip(cols, 0, n - 1)]
    return np.where(valid, out, 0)


def rows_to_dense(rows, kappa):
    n = rows.shape[0]
    d = np.zeros((n, n), dtype=complex)
    for i in range(2 * kappa + 1):
        r = np.arange(n)
        c = r - kappa + i
        ok = (c >= 0) & (c < n)
        d[r[ok], c[ok]] = rows[ok, i]
    return d


def from_dense(d_mean, kappa, spread=()):
    """BandedSet from dense matrices; ``spread`` holds (lam, D_j) pairs."""
    return BandedSet(kappa, band_rows(d_mean, kappa),
                     [(float(lam), band_rows(dj, kappa)) for lam, dj in spread])


def from_posterior(mean, eigvals, eigvecs, basis, kappa, rel_floor=1e-12):
    """BandedSet for D[mean] and D[xi_j] straight from BEM coefficients.

    Eigenpairs with eigenvalue below ``rel_floor * max(eigvals)`` are dropped.
    """
    t = band_tensor(basis, kappa)
    center = t @ mean
    spread = []
    if eigvals.size:
        keep = eigvals > rel_floor * max(eigvals.max(), 0.0)
        rows = np.einsum("ria,aj->jri", t, eigvecs[:, keep])
        spread = list(zip(eigvals[keep].tolist(), rows))
    return BandedSet(kappa, center, spread)


def _window(x, n, kappa):
    idx = np.arange(n - 2 * kappa, n + 1)
    ok = (idx >= 0) & (idx < x.size)
    w = np.zeros(idx.size, dtype=complex)
    w[ok] = x[idx[ok]]
    return w


def branch_metric(window, n, banded, y):
    """Contribution of row ``n - kappa`` for the symbols x[n-2kappa..n]."""
    r = n - banded.kappa
    if not 0 <= r < banded.n:
        return 0.0
    w = np.asarray(window)
    cw = banded.center[r] @ w
    value = abs(cw) ** 2 - 2.0 * np.real(np.conj(y[r]) * cw)
    for lam, rows in banded.spread:
        value += lam * abs(rows[r] @ w) ** 2
    return float(value)


def banded_objective(x, banded, y):
    """Sum of branch metrics along a full sequence."""
    k = banded.kappa
    return sum(branch_metric(_window(x, n, k), n, banded, y) for n in range(k, banded.n + k))


def dense_objective(x, d_mean, y, spread=()):
    """The data objective evaluated with dense matrices."""
    dx = d_mean @ x
    value = np.vdot(dx, dx).real - 2.0 * np.real(np.vdot(y, dx))
    for lam, dj in spread:
        v = dj @ x
        value += lam * np.vdot(v, v).real
    return float(value)


def _candidates(frame, pilots):
    """Per-subcarrier candidate symbol arrays."""
    cands = [frame.constellation] * frame.n_subcarriers
    for i, p in zip(frame.pilot_indices, pilots):
        cands[i] = np.array([p], dtype=complex)
    for i in frame.data_indices[frame.forced_zero_mask]:
        cands[i] = np.zeros(1, dtype=complex)
    return cands


def detect(y, banded, frame, pilots, max_states=1 << 20):
    """Minimize the banded objective over the constellation.

    Known subcarriers (pilots and forced-zero edges) carry a single candidate,
    which collapses the state space as the trellis passes them.

    Returns
    -------
    ndarray
        Detected symbols in ``frame.data_indices`` order (zeros at forced edges).
    """
    kappa = banded.kappa
    n_sub = frame.n_subcarriers
    if kappa < 1 or 2 * kappa >= n_sub:
        raise ValueError("kappa must satisfy 1 <= kappa < N/2")
    if banded.n != n_sub:
        raise ValueError("banded set does not match the frame size")
    if frame.constellation.size ** (2 * kappa) > max_states:
        raise MemoryError(f"{frame.constellation.size ** (2 * kappa)} trellis states "
                          f"exceed the budget of {max_states}")
    cands = _candidates(frame, pilots)
    pad = np.zeros(1, dtype=complex)

    def cand(pos):
        return cands[pos] if 0 <= pos < n_sub else pad

    grams = banded.row_grams()
    lin = np.conj(y)[:, None] * banded.center

    acc = np.zeros((1,) * (2 * kappa))
    backs = []
    for n in range(n_sub + kappa):
        window = [cand(p) for p in range(n - 2 * kappa, n + 1)]
        shape = tuple(c.size for c in window)
        total = np.broadcast_to(acc[..., None], shape)
        r = n - kappa
        if r >= 0:
            grid = np.stack(np.meshgrid(*window, indexing="ij"), axis=-1).reshape(-1, 2 * kappa + 1)
            quad = np.einsum("ci,ci->c", grid.conj(), grid @ grams[r].T).real
            metric = quad - 2.0 * (grid @ lin[r]).real
            total = total + metric.reshape(shape)
        backs.append(np.argmin(total, axis=0))
        acc = np.min(total, axis=0)

    state = list(np.unravel_index(np.argmin(acc), acc.shape))
    chosen = np.zeros(n_sub, dtype=int)
    for n in range(n_sub + kappa - 1, -1, -1):
        if n < n_sub:
            chosen[n] = state[-1]
        dropped = backs[n][tuple(state)]
        state = [dropped] + state[:-1]

    x = np.array([cands[i][chosen[i]] for i in range(n_sub)])
    return x[frame.data_indices]
