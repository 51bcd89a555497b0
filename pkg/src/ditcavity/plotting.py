"""Static figures written to file (SVG by default, any matplotlib format by suffix).

SVG output is made reproducible by fixing the hash salt and dropping the
date stamp, so repeated runs give identical files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .model import MHZ, cooperativity  # noqa: E402

plt.rcParams.update(
    {
        "svg.hashsalt": "ditcavity",
        "svg.fonttype": "path",
        "font.size": 9,
        "axes.labelsize": 9,
        "figure.dpi": 100,
    }
)

DC_LABEL = r"$\Delta_c/\kappa$"
DA_LABEL = r"$\Delta_a/\gamma$"


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Date": None} if path.suffix.lower() == ".svg" else None
    fig.savefig(path, metadata=meta, bbox_inches="tight")
    plt.close(fig)
    return path


def _heat(ax, dc_n, da_n, values, label):
    mesh = ax.pcolormesh(dc_n, da_n, np.asarray(values).T, shading="nearest", cmap="viridis")
    ax.set_xlabel(DC_LABEL)
    ax.set_ylabel(DA_LABEL)
    ax.figure.colorbar(mesh, ax=ax, label=label)
    return mesh


def _overlay_hyperbola(ax, C, dc_n, da_n):
    """Undamped avoided crossing da/gamma = C / (dc/kappa), both branches."""
    lo, hi = da_n.min(), da_n.max()
    for sign in (-1, 1):
        x = np.linspace(sign * 1e-3, sign * np.abs(dc_n).max(), 400)
        y = C / x
        keep = (y >= lo) & (y <= hi)
        ax.plot(x[keep], y[keep], color="k", lw=0.8)
    ax.set_xlim(dc_n.min(), dc_n.max())
    ax.set_ylim(lo, hi)


def plot_surface(surface, path, overlay: bool = True, title: str | None = None, label: str = "flux (photons/s)"):
    dc_n, da_n = surface.normalized_axes()
    fig, ax = plt.subplots(figsize=(4.2, 3.4))
    _heat(ax, dc_n, da_n, surface.values, label)
    C = cooperativity(surface.params)
    if overlay and C > 0:
        _overlay_hyperbola(ax, C, dc_n, da_n)
    ax.set_title(title or f"{surface.mode.value} drive, C = {C:.3g}")
    return _save(fig, path)


def plot_counts(data, path, title: str | None = None):
    dc_n, da_n = data.delta_c / data.params.kappa, data.delta_a / data.params.gamma
    fig, ax = plt.subplots(figsize=(4.2, 3.4))
    _heat(ax, dc_n, da_n, data.mean_counts, "counts per exposure")
    ax.set_title(title or f"{data.mode.value} drive counts")
    return _save(fig, path)


def plot_fit(data, model, path, C_hat: float):
    """Data, fitted model and normalised residual side by side."""
    dc_n, da_n = data.delta_c / data.params.kappa, data.delta_a / data.params.gamma
    mean = data.mean_counts
    resid = (mean - model) / np.sqrt(data.variance())
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    _heat(axes[0], dc_n, da_n, mean, "counts")
    axes[0].set_title("data")
    _heat(axes[1], dc_n, da_n, model, "counts")
    axes[1].set_title(f"model, C = {C_hat:.4g}")
    _heat(axes[2], dc_n, da_n, resid, "residual / sigma")
    axes[2].set_title("residual")
    fig.tight_layout()
    return _save(fig, path)


def plot_eigen_sweep(g_values, eig, path, kappa: float):
    g = np.asarray(g_values) / MHZ
    fig, (ax_re, ax_im) = plt.subplots(2, 1, figsize=(4.5, 5), sharex=True)
    for k, name in enumerate(("+", "-")):
        ax_re.plot(g, eig[:, k].real / MHZ, label=rf"Re $\tilde\omega_{name}$")
        ax_im.plot(g, -eig[:, k].imag / MHZ, ls="--", label=rf"$-$Im $\tilde\omega_{name}$")
    ax_re.set_ylabel(r"frequency$/2\pi$ (MHz)")
    ax_im.set_ylabel(r"damping$/2\pi$ (MHz)")
    ax_im.set_xlabel(r"$g/2\pi$ (MHz)")
    ax_re.legend(frameon=False)
    ax_im.legend(frameon=False)
    return _save(fig, path)


def plot_diagonal(spectrum, path, fit_params=None):
    x = spectrum.detuning / spectrum.params.gamma
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.plot(x, spectrum.values, lw=1, label="model")
    if fit_params is not None:
        from .spectra import lorentzian

        ax.plot(x, lorentzian(spectrum.detuning, *fit_params), ls=":", lw=1.2, label="Lorentzian fit")
        ax.legend(frameon=False)
    ax.set_xlabel(r"$\Delta_a/\gamma = \Delta_c/\gamma$")
    ax.set_ylabel("flux (photons/s)")
    return _save(fig, path)


def plot_trajectory(traj, path, kappa: float):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    power = np.abs(traj.a) ** 2
    ax.semilogy(traj.times * kappa, np.where(power > 0, power, np.nan))
    ax.set_xlabel(r"$\kappa t$")
    ax.set_ylabel(r"$|a|^2$")
    return _save(fig, path)
