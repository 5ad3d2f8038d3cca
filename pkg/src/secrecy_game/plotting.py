"""Static figures for the experiment tables.

Figures are drawn with the non-interactive Agg backend and written to disk;
nothing is shown on screen. Only the table contents are used, so a figure
can be regenerated from the CSV rows alone.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import MODES, Table  # noqa: E402

__all__ = ["plot_convergence", "plot_sweep"]


def plot_convergence(table: Table, path: str | Path, title: str | None = None) -> Path:
    """Rate of each user against the iteration index."""
    path = Path(path)
    iters = table.column("iteration")
    users = table.column("user")
    rates = table.column("rate")
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in sorted(set(users)):
        xs = [i for i, u in zip(iters, users) if u == k]
        ys = [r for r, u in zip(rates, users) if u == k]
        ax.plot(xs, ys, marker="o", markersize=3, label=f"user {k}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("average secrecy rate (bits/channel use)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_sweep(table: Table, path: str | Path, title: str | None = None) -> Path:
    """Sum rate per mode against SNR, with the price of anarchy in a second panel when present."""
    path = Path(path)
    has_poa = "poa" in table.header
    fig, axes = plt.subplots(1, 2 if has_poa else 1, figsize=(11 if has_poa else 6, 4), squeeze=False)
    ax = axes[0, 0]
    snrs = table.column("snr")
    modes = table.column("mode")
    rates = table.column("sum_rate")
    for mode in MODES:
        xs = [s for s, m in zip(snrs, modes) if m == mode]
        ys = [r for r, m in zip(rates, modes) if m == mode]
        if xs:
            ax.plot(xs, ys, marker="o", markersize=3, label=mode)
    ax.set_xlabel("SNR")
    ax.set_ylabel("sum secrecy rate (bits/channel use)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    if has_poa:
        seen = {}
        for s, p in zip(snrs, table.column("poa")):
            seen.setdefault(s, p)
        bx = axes[0, 1]
        bx.plot(list(seen), list(seen.values()), marker="o", markersize=3)
        bx.set_xlabel("SNR")
        bx.set_ylabel("price of anarchy")
        bx.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
