"""Figure rendering for the CLI ``--plot`` option.

Uses the non-interactive Agg backend; every figure goes to a file next to
the data it was drawn from.
"""

import math
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import FILE_MODE  # noqa: E402

golden_mean = (math.sqrt(5) - 1.0) / 2.0
fig_width = 6.4

params = {
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "mathtext.fontset": "stix",
    "lines.linewidth": 0.8,
    "figure.dpi": 120,
    "savefig.dpi": 150,
}

REGIME_CODES = {"Stationary": 0, "Breathing": 1, "Chaoticlike": 2, "SelfFocusing": 3}


def _fig(nrows=1, ncols=1, height=None, **kw):
    with plt.rc_context(params):
        return plt.subplots(nrows, ncols, figsize=(fig_width, height or fig_width * golden_mean), **kw)


def save(fig, path):
    """Render to a temp file beside ``path`` and rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=path.suffix, dir=path.parent or ".")
    os.close(fd)
    try:
        fig.savefig(tmp, format=path.suffix.lstrip(".") or "png", bbox_inches="tight")
        os.chmod(tmp, FILE_MODE)
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def plot_trajectory(record, path):
    """Coherence and participation ratio vs time, plus the density map if recorded."""
    n = record.config.n_sites
    times, dens = record.density_matrix()
    rows = 3 if len(times) > 1 else 2
    fig, axes = _fig(rows, 1, height=2.2 * rows, sharex=True)
    t = np.arange(len(record.coherence))
    axes[0].plot(t, record.coherence, color="k")
    axes[0].axhline(2 * n - 1, color="0.6", ls=":")
    axes[0].set_ylabel(r"$C_{l_1}(t)$")
    axes[1].plot(t, record.participation, color="C0")
    axes[1].set_ylabel("PR(t)")
    if rows == 3:
        im = axes[2].imshow(dens.T, aspect="auto", origin="lower", cmap="viridis",
                            extent=(times[0], times[-1], 0.5, n + 0.5), interpolation="nearest")
        axes[2].set_ylabel("site n")
        fig.colorbar(im, ax=axes[2], label=r"$|\psi_n|^2$", pad=0.01)
    axes[-1].set_xlabel("t")
    cfg = record.config
    axes[0].set_title(rf"N={n}, $\theta$={cfg.theta / math.pi:.4g}$\pi$, $\chi$={cfg.chi:.4g}")
    return save(fig, path)


def plot_cmin_curve(chis, cmins, n_sites, path, chi_sd=None):
    fig, ax = _fig()
    ax.plot(chis, np.asarray(cmins) / (2 * n_sites - 1), "o-", ms=2.5, color="k")
    if chi_sd is not None:
        ax.axvline(chi_sd, color="C3", ls="--", label=rf"$\chi_{{sd}}$={chi_sd:.4g}")
        ax.legend()
    ax.set_xlabel(r"$\chi$")
    ax.set_ylabel(r"$C_{l_1}^{min}/(2N-1)$")
    return save(fig, path)


def plot_threshold_curves(curves, path):
    fig, ax = _fig()
    for curve in curves:
        ax.plot(curve.theta_grid / math.pi, curve.chi_sd, "o-", ms=3, label=f"N={curve.n_sites}")
    ax.set_xlabel(r"$\theta$ ($\pi$ units)")
    ax.set_ylabel(r"$\chi_{sd}$")
    ax.set_yscale("log")
    ax.legend()
    return save(fig, path)


def plot_scaling(series, path):
    """``series`` maps a legend label to ``(sizes, chi_sd, fit)``."""
    fig, ax = _fig()
    for k, (label, (sizes, chi_sd, fit)) in enumerate(series.items()):
        sizes = np.asarray(sizes, dtype=float)
        ax.loglog(sizes, chi_sd, "o", color=f"C{k}", label=label)
        if fit is not None:
            ax.loglog(sizes, fit.prefactor * sizes**fit.exponent, "-", color=f"C{k}",
                      label=f"slope {fit.exponent:.3f}")
    ax.set_xlabel("N")
    ax.set_ylabel(r"$\chi_{sd}$")
    ax.legend()
    return save(fig, path)


def plot_phase_diagram(grid, path):
    """Long-time-average coherence over (theta, chi) with regime labels beside it."""
    fig, (ax0, ax1) = _fig(1, 2, height=fig_width * 0.45)
    th = grid.theta_axis / math.pi
    n = grid.config.n_sites
    extent = (th[0], th[-1], grid.chi_axis[0], grid.chi_axis[-1])
    im = ax0.imshow(grid.mean_coherence / (2 * n - 1), origin="lower", aspect="auto",
                    extent=extent, cmap="jet", interpolation="nearest")
    fig.colorbar(im, ax=ax0, label=r"$\overline{C}_{l_1}/(2N-1)$")
    codes = np.array([[np.nan if lab is None else REGIME_CODES[lab] for lab in row]
                      for row in grid.label_names()], dtype=float)
    cmap = matplotlib.colors.ListedColormap(["#2b8cbe", "#7bccc4", "#fdae61", "#d7191c"])
    im1 = ax1.imshow(codes, origin="lower", aspect="auto", extent=extent, cmap=cmap,
                     vmin=-0.5, vmax=3.5, interpolation="nearest")
    cb = fig.colorbar(im1, ax=ax1, ticks=range(4))
    cb.ax.set_yticklabels(list(REGIME_CODES))
    for ax in (ax0, ax1):
        ax.set_xlabel(r"$\theta$ ($\pi$ units)")
    ax0.set_ylabel(r"$\chi$")
    return save(fig, path)
