"""Figure rendering for the CLI report path.

Renders matplotlib figures to files next to the delimited output: a terminal
histogram per horizon (with the reference density overlaid when a closed-form
kernel exists) and a log-log error plot for convergence studies. Uses the Agg
backend so the CLI works headless.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import RateFit, ReferenceKernel


def histogram_figure(
    path: str,
    samples: np.ndarray,
    horizon: float,
    kernel: Optional[ReferenceKernel] = None,
    bins: int = 80,
    title: str = "",
) -> None:
    """Terminal-value histogram; overlays the kernel density and atom mass."""
    samples = np.asarray(samples, dtype=float)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.hist(samples, bins=bins, density=True, alpha=0.6, color="#4878cf",
            label=f"terminal values (N={len(samples)})")
    if kernel is not None:
        lo = max(kernel.support[0], float(np.min(samples)) - 0.5)
        hi = min(kernel.support[1], float(np.max(samples)) + 0.5)
        xs = np.linspace(lo, hi, 801)
        if kernel.kinks:
            xs = np.unique(np.concatenate([xs, np.asarray(kernel.kinks)]))
        ax.plot(xs, np.asarray(kernel.density(xs), dtype=float),
                color="#d1495b", lw=1.5, label="reference density")
        if kernel.atom is not None:
            loc, mass = kernel.atom
            frac = float(np.mean(samples == loc))
            ax.plot([loc], [0.0], marker="^", color="#d1495b", ms=9, clip_on=False,
                    label=f"atom mass {mass:.4f} (empirical {frac:.4f})")
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.set_title(title or f"terminal law at T={horizon:g}")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def convergence_figure(
    path: str,
    fits: Sequence[tuple],
    metric_label: str,
    title: str = "",
) -> None:
    """Log-log error plot; `fits` is a list of (label, RateFit)."""
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for label, fit in fits:
        ms = np.array([p[0] for p in fit.points])
        es = np.array([p[1] for p in fit.points])
        line, = ax.loglog(ms, es, marker="o",
                          label=f"{label} (slope {fit.slope:.3f})")
        fitted = np.exp(fit.intercept) * ms**fit.slope
        ax.loglog(ms, fitted, ls="--", lw=0.9, color=line.get_color())
    ax.set_xlabel(metric_label)
    ax.set_ylabel("Wasserstein error")
    ax.set_title(title or "empirical convergence")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", ls=":", lw=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
