"""Matplotlib figures for CLI reports.  Imported lazily so the library works without a display."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (math.sqrt(5) - 1.0) / 2.0
fig_width = 5.0

params = {
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}


def _new():
    with matplotlib.rc_context(params):
        fig, ax = plt.subplots()
    return fig, ax


def _save(fig, path: str) -> str:
    with matplotlib.rc_context(params):
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_profile(profile, path: str, estimate=None, reference: float | None = None) -> str:
    """``rho`` and ``rho_plus`` on log-log axes, with the fitted tail line."""
    fig, ax = _new()
    r = profile.r_grid
    ax.loglog(r, profile.rho_star, "o-", label=r"$\hat\rho^*$")
    ax.loglog(r, np.maximum(profile.rho_plus, 1e-12), "s--", label=r"$\hat\rho_+$")
    if estimate is not None:
        lo, hi = estimate.window
        xs = np.array([lo, hi], dtype=float)
        sel = (r >= lo) & (r <= hi)
        c = np.exp(np.mean(np.log(profile.rho_star[sel]) - estimate.slope * np.log(r[sel])))
        ax.loglog(xs, c * xs**estimate.slope, "k-", lw=2, alpha=0.6, label=f"slope {estimate.slope:.3f}")
    if reference is not None:
        ax.loglog(r, r.astype(float) ** reference, ":", color="gray", label=f"$r^{{{reference:g}}}$")
    ax.set_xlabel("r")
    ax.set_ylabel("distance")
    ax.set_title(profile.strategy)
    ax.legend()
    return _save(fig, path)


def plot_growth(ball, path: str) -> str:
    fig, ax = _new()
    n = np.arange(len(ball.sphere_sizes))
    ax.semilogy(n, np.maximum(ball.sphere_sizes, 1), "o-")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$\sigma(n)$")
    return _save(fig, path)


def plot_width_sweep(reports, path: str) -> str:
    fig, ax = _new()
    w = [r.w for r in reports]
    ax.semilogy(w, [max(r.sup_error, 1e-17) for r in reports], "o-", label="sup error")
    ax.semilogy(w, [max(r.chain_bound, 1e-17) for r in reports], "s--", label="norm bound")
    ax.set_xlabel("width w")
    ax.legend()
    return _save(fig, path)


def plot_schur(reports, path: str) -> str:
    fig, ax = _new()
    n = [r.truncation for r in reports]
    ax.semilogy(n, [max(r.max_row_sum, 1e-17) for r in reports], "o-", label="max row sum")
    ax.semilogy(n, [max(r.spectral_norm, 1e-17) for r in reports], "s--", label="spectral norm")
    ax.set_xlabel("truncation n")
    ax.legend()
    return _save(fig, path)


def plot_distances(dX, dY, path: str, title: str = "") -> str:
    """Scatter of image distance against source distance."""
    fig, ax = _new()
    ax.plot(np.ravel(dX), np.ravel(dY), ".", alpha=0.4)
    ax.set_xlabel(r"$d_X$")
    ax.set_ylabel(r"$d_Y$")
    if title:
        ax.set_title(title)
    return _save(fig, path)
