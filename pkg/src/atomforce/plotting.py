"""Figure output for sweep and spectrum reports (matplotlib, Agg backend)."""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({
        "font.size": 10,
        "axes.linewidth": 0.8,
        "lines.linewidth": 1.2,
        "savefig.dpi": 150,
        "figure.figsize": (4.5, 3.2),
    })
    return plt


def plot_sweep(result, path, axis=(1.0, 0.0, 0.0), force_scale=1.0, force_label="F"):
    """Force along ``axis`` (and magnitude) versus velocity along ``axis``."""
    plt = _pyplot()
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    v = result.velocities @ axis
    f = force_scale * (result.forces @ axis)
    fig, ax = plt.subplots()
    ax.plot(v, f, color="k", label="projection")
    ax.plot(v, force_scale * np.linalg.norm(result.forces, axis=1), color="C0", ls="--",
            label="magnitude")
    bad = ~result.converged
    if bad.any():
        ax.plot(v[bad], np.zeros(bad.sum()), "rx", label="not converged")
    ax.axhline(0, color="0.6", lw=0.5)
    ax.set_xlabel(r"$v$ [$\Gamma/k$]")
    ax.set_ylabel(force_label)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_spectrum(forces, path):
    """Stem plot of ``|R_{j,n}|`` for every wave."""
    plt = _pyplot()
    fig, ax = plt.subplots()
    n = forces.spectrum_n
    for j in range(forces.spectrum_R.shape[1]):
        amp = np.abs(forces.spectrum_R[:, j])
        ax.semilogy(n, np.where(amp > 0, amp, np.nan), "o-", ms=2.5, label=f"wave {j}")
    ax.set_xlabel("harmonic $n$")
    ax.set_ylabel(r"$|R_{j,n}|$ [$\Gamma$]")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
