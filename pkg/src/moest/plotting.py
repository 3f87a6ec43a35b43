"""Render mean-NMSE curves of a sweep to an image file."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .experiments import ResultRow, summarize

__all__ = ["plot_sweep"]

_X_LABELS = {
    "snr_db": "SNR (dB)",
    "c": "number of paths C",
    "c_hat": "assumed number of paths",
}

_STYLES = {
    "mo-est": dict(marker="o", color="tab:blue"),
    "alt-ls": dict(marker="s", color="tab:red"),
}


def plot_sweep(rows: list[ResultRow], path: str, x_field: str = "snr_db"):
    """Plot mean NMSE (dB) against the sweep variable, one curve per algorithm."""
    if x_field not in _X_LABELS:
        raise ValueError(f"unsupported sweep variable {x_field!r}")
    summary = summarize(rows, x_field)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for algo in sorted({algorithm for algorithm, *_ in summary}):
        points = [(x, db) for algorithm, x, _, db in summary if algorithm == algo]
        xs, ys = zip(*sorted(points))
        ax.plot(xs, ys, label=algo, **_STYLES.get(algo, {}))
    ax.set_xlabel(_X_LABELS[x_field])
    ax.set_ylabel("NMSE (dB)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
