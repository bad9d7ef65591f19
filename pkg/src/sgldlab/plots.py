"""Figure rendering for the report paths.

Each helper writes a PNG next to the delimited output it illustrates.  The
Agg backend is forced so the CLI works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_figure1_plot(samples: np.ndarray, axes, density: np.ndarray, path: Path) -> Path:
    """Scatter of the posterior samples next to the KDE heat map."""
    ax0, ax1 = axes
    fig, (left, right) = plt.subplots(1, 2, figsize=(9.5, 4.2))
    left.plot(samples[:, 0], samples[:, 1], ".", ms=1.0, alpha=0.25, color="tab:red")
    left.set_xlabel(r"$\theta_0$")
    left.set_ylabel(r"$\theta_1$")
    left.set_title("posterior samples")
    mesh = right.pcolormesh(ax0, ax1, density.T, shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=right, label="density")
    right.set_xlabel(r"$\theta_0$")
    right.set_ylabel(r"$\theta_1$")
    right.set_title("kernel density estimate")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_rate_plot(ratefit, path: Path) -> Path:
    """Plateau distance against stepsize on log-log axes with the fitted slope."""
    cells = ratefit.cells
    lams = np.array([c.lam for c in cells])
    dist = np.array([c.distance for c in cells])
    errs = np.array([c.std_error for c in cells])
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.errorbar(lams, dist, yerr=2 * errs, fmt="o", capsize=3, label="plateau distance")
    if np.isfinite(ratefit.alpha):
        grid = np.geomspace(lams.min(), lams.max(), 64)
        fit = np.exp(ratefit.log_prefactor) * grid**ratefit.alpha
        ax.plot(grid, fit, "--", color="gray",
                label=rf"fit $\alpha$ = {ratefit.alpha:.3f} $\pm$ {ratefit.alpha_halfwidth:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"stepsize $\lambda$")
    ax.set_ylabel("distance to reference")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_bound_plot(report, path: Path) -> Path:
    """Empirical distances against the computed upper bounds per stepsize."""
    rows = [r for r in report.rows if r.n_steps > 0]
    lams = np.array([r.lam for r in rows])
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    ax.plot(lams, [r.w1_empirical for r in rows], "o-", label="empirical W1")
    ax.plot(lams, [r.w2_empirical for r in rows], "s-", label="empirical W2")
    b1 = np.array([r.w1_bound for r in rows])
    b2 = np.array([r.w2_bound for r in rows])
    if np.isfinite(b1).all():
        ax.plot(lams, b1, "^--", label="W1 bound")
    if np.isfinite(b2).all():
        ax.plot(lams, b2, "v--", label="W2 bound")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"stepsize $\lambda$")
    ax.set_ylabel("distance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_trace_plot(samples: np.ndarray, path: Path) -> Path:
    """Componentwise trace of retained samples."""
    fig, ax = plt.subplots(figsize=(7.0, 3.2))
    for j in range(min(samples.shape[1], 4)):
        ax.plot(samples[:, j], lw=0.5, label=rf"$\theta_{j}$")
    ax.set_xlabel("retained sample index")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
