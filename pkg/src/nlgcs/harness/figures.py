"""Matplotlib rendering for the report paths (PNG, Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sweep import SweepReport


def sweep_figure(report: SweepReport, path) -> None:
    """Log-log median worst-case error vs m with the fitted slope line."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    m = np.array(report.m_values, dtype=float)
    err = np.array(report.median_worst_errors)
    worst = report.worst_by_m()
    metric = report.config.metric
    for mi, mv in enumerate(report.m_values):
        pts = [1.0 - w if metric == "cosine" else w for w in worst[mv]]
        ax.plot([mv] * len(pts), pts, ".", color="0.6", markersize=4,
                label="per-trial worst case" if mi == 0 else None)
    ax.plot(m, err, "o-", color="C0", label="median worst case")
    fit = np.exp(report.intercept) * m ** report.slope
    ax.plot(m, fit, "--", color="C3",
            label=f"fit slope {report.slope:.2f} (r$^2$={report.r2:.2f})")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("measurements m")
    ylabel = "1 - cosine similarity" if metric == "cosine" else "relative $\\ell_2$ error"
    ax.set_ylabel(ylabel)
    ax.set_title(f"{report.config.experiment_id}: uniform recovery error vs m")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fit_figure(pairs, slope: float, intercept: float, r2: float, path) -> None:
    """Scatter of (m, err) with the fitted power law."""
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    m = np.array([p[0] for p in pairs], dtype=float)
    e = np.array([p[1] for p in pairs], dtype=float)
    ax.plot(m, e, "o", color="C0", label="data")
    grid = np.geomspace(m.min(), m.max(), 64)
    ax.plot(grid, np.exp(intercept) * grid ** slope, "--", color="C3",
            label=f"slope {slope:.3f}, r$^2$={r2:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("m")
    ax.set_ylabel("err")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def process_figure(m_values, medians, slope: float, path) -> None:
    """Product-process median sup vs m on log-log axes."""
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    m = np.array(m_values, dtype=float)
    med = np.array(medians)
    ax.plot(m, med, "o-", color="C0", label="median sup")
    anchor = med[0] * (m / m[0]) ** (-0.5)
    ax.plot(m, anchor, ":", color="0.5", label="$m^{-1/2}$ reference")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("measurements m")
    ax.set_ylabel("sup of centered product process")
    ax.set_title(f"empirical slope {slope:.2f}")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
