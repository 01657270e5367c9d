"""Figures written next to the CSV/JSON outputs of the CLI.

Rendering only: each function takes already computed data and a path.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0

RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def _figure(width=6.0, height=None):
    if height is None:
        height = width * GOLDEN
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path):
    with plt.rc_context(RC):
        fig.tight_layout()
        fig.savefig(path)
    plt.close(fig)


def plot_time_signal(signal, half_plane, path, window=None):
    """|G_check(tau)| on a log scale with the forbidden half-line shaded."""
    fig, ax = _figure()
    tau, mag = signal.tau, np.abs(signal.values)
    if window is not None:
        keep = np.abs(tau) <= window
        tau, mag = tau[keep], mag[keep]
    floor = max(mag.max() * 1e-16, 1e-300)
    ax.semilogy(tau, np.maximum(mag, floor), lw=0.8, color="k")
    lo, hi = tau.min(), tau.max()
    if half_plane.value == "lower":
        ax.axvspan(lo, 0, color="tab:red", alpha=0.12, lw=0, label="forbidden (tau < 0)")
    else:
        ax.axvspan(0, hi, color="tab:red", alpha=0.12, lw=0, label="forbidden (tau > 0)")
    ax.set_xlim(lo, hi)
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$|\check G(\tau)|$")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_lineshape_fit(energies, y, sigma, fitted, path):
    fig, ax = _figure()
    if sigma is None:
        ax.plot(energies, y, ".", ms=2, color="0.4", label="data")
    else:
        ax.errorbar(energies, y, yerr=sigma, fmt=".", ms=2, lw=0.5, color="0.4", label="data")
    ax.plot(energies, fitted, color="tab:blue", lw=1.2, label="Breit-Wigner fit")
    ax.set_xlabel("E")
    ax.set_ylabel(r"$|a(E)|^2$")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_survival(t, model, path, durations=None, label="exp(-Gamma t)"):
    """Survival curve, optionally over the empirical survival of measured durations."""
    fig, ax = _figure()
    ax.semilogy(t, model, color="tab:blue", lw=1.2, label=label)
    if durations is not None and len(durations):
        d = np.sort(np.asarray(durations))
        s = 1.0 - np.arange(d.size) / d.size
        ax.step(d, s, where="post", color="k", lw=0.8, label=f"dark periods (N={d.size})")
    ax.set_xlabel("t")
    ax.set_ylabel("survival")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_trace(trace, path, periods=(), span=None):
    """Fluorescence counts per second with dark periods shaded."""
    fig, ax = _figure(width=8.0, height=3.0)
    t = trace.bin_starts
    rate = trace.counts / trace.bin_width
    if span is not None:
        keep = (t >= span[0]) & (t <= span[1])
        t, rate = t[keep], rate[keep]
    ax.step(t, rate, where="post", lw=0.5, color="k")
    for p in periods:
        if span is None or (p.t1 >= span[0] and p.t0 <= span[1]):
            ax.axvspan(p.t0, p.t1, color="tab:blue", alpha=0.15, lw=0)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("counts / s")
    if t.size:
        ax.set_xlim(t[0], t[-1] + trace.bin_width)
    _save(fig, path)
