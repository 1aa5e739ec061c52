"""Figures for experiment results, written next to the CSV output."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "axes.labelsize": 10,
}


def _by_snr(records):
    out = {}
    for r in records:
        out.setdefault(r.snr_db, []).append(r)
    return {s: sorted(rows, key=lambda r: r.iteration) for s, rows in sorted(out.items())}


def convergence_figure(records, metric="mse"):
    """MSE or BER against iteration, one line per SNR."""
    attr = {"mse": "mse_mean", "ber": "ber_mean"}[metric]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for snr, rows in _by_snr(records).items():
            it = [r.iteration for r in rows]
            val = np.maximum([getattr(r, attr) for r in rows], 1e-12)
            ax.semilogy(it, val, marker="o", ms=3, label=f"{snr:g} dB")
        ax.set_xlabel("iteration")
        ax.set_ylabel(metric.upper())
        ax.legend()
        fig.tight_layout()
    return fig


def snr_figure(records, perfect_csi_ber=None):
    """Initial and final MSE/BER against SNR, with the perfect-CSI BER if given."""
    groups = _by_snr(records)
    snr = np.array(list(groups))
    first = [rows[0] for rows in groups.values()]
    last = [rows[-1] for rows in groups.values()]
    with plt.rc_context(STYLE):
        fig, (ax_m, ax_b) = plt.subplots(1, 2, figsize=(9.0, 3.6))
        ax_m.semilogy(snr, [r.mse_mean for r in first], "s--", label="initial")
        ax_m.semilogy(snr, [r.mse_mean for r in last], "o-", label=f"iteration {last[0].iteration}")
        ax_b.semilogy(snr, np.maximum([r.ber_mean for r in first], 1e-6), "s--", label="initial")
        ax_b.semilogy(snr, np.maximum([r.ber_mean for r in last], 1e-6), "o-",
                      label=f"iteration {last[0].iteration}")
        if perfect_csi_ber:
            ax_b.semilogy(snr, np.maximum([perfect_csi_ber[s] for s in snr], 1e-6), "k:",
                          label="perfect CSI")
        for ax, name in ((ax_m, "MSE"), (ax_b, "BER")):
            ax.set_xlabel("SNR (dB)")
            ax.set_ylabel(name)
            ax.legend()
        fig.tight_layout()
    return fig


def save_report_figures(records, csv_path, perfect_csi_ber=None):
    """Render all figures beside ``csv_path``; returns the written paths."""
    base = Path(csv_path)
    figures = {
        "mse_convergence": convergence_figure(records, "mse"),
        "ber_convergence": convergence_figure(records, "ber"),
        "snr": snr_figure(records, perfect_csi_ber),
    }
    paths = []
    for name, fig in figures.items():
        path = base.with_name(f"{base.stem}_{name}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
