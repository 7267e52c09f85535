"""Figure rendering for reports: coefficient decay, per-period error
histories, and convergence plots.  All figures go straight to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_decay_figure", "render_error_history", "render_convergence"]


def render_decay_figure(profiles, path, title: str = "") -> str:
    """Coefficient norms (circles) and fitted decay model (asterisks) per h."""
    fig, ax = plt.subplots(figsize=(7.5, 5.5))
    colors = plt.cm.viridis(np.linspace(0.0, 0.85, len(profiles)))
    for prof, color in zip(profiles, colors):
        j = np.arange(prof.norms.size)
        ax.semilogy(j, prof.norms, "o-", color=color, markersize=4,
                    label=f"h = {prof.h:.4g}")
        if prof.fit is not None:
            ax.semilogy(j, prof.fit.model(j), "*", color=color, markersize=7)
    ax.set_xlabel("coefficient index j")
    ax.set_ylabel("coefficient norm")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_error_history(report, path) -> str:
    """Per-period sampled errors of one run, one line per error column."""
    fig, ax = plt.subplots(figsize=(7.5, 5.0))
    for name, samples in report.history.items():
        if not samples:
            continue
        periods, values = zip(*samples)
        values = np.maximum(np.asarray(values, dtype=float), 1e-18)
        ax.semilogy(periods, values, label=name)
    ax.set_xlabel("period")
    ax.set_ylabel("error")
    ax.set_title(f"{report.problem} {report.method or 'hbvm'} "
                 f"(k={report.k}, s={report.s}, h={report.h:.4g})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_convergence(reports, path) -> str:
    """Error versus steps-per-period on a log-log scale for a table of runs."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    ns = [rep.n for rep in reports]
    for column in sorted({c for rep in reports for c in rep.errors}):
        values = [rep.errors.get(column) for rep in reports]
        if any(v is None for v in values):
            continue
        ax.loglog(ns, values, "o-", label=column)
    ax.set_xlabel("steps per period n")
    ax.set_ylabel("max error over sampled periods")
    ax.set_title(f"{reports[0].problem} {reports[0].method or 'hbvm'}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
