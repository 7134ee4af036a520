"""Figures written next to the CSV reports (PNG, Agg backend)."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_DPI = 120
# no timestamps or version strings, so identical runs give identical files
_METADATA = {"Software": None}


def _save(fig, path):
    fig.savefig(path, format="png", dpi=_DPI, metadata=_METADATA)
    plt.close(fig)
    return path


def trajectory_figure(traj, path, title=""):
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    r = np.concatenate([[0.0], traj.r])
    u, du = traj.evaluate(r)
    for i in range(traj.L):
        ax0.plot(r, u[:, i], label=f"u{i + 1}")
        ax1.plot(r, du[:, i], label=f"u{i + 1}'")
    ax0.axhline(0.0, color="0.6", lw=0.8)
    ax0.set_ylabel("u")
    ax1.set_ylabel("u'")
    ax1.set_xlabel("r")
    if traj.r[-1] / max(traj.r[0], 1e-300) > 1e3:
        ax1.set_xscale("symlog", linthresh=1.0)
    ax0.legend(frameon=False)
    ax0.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def sweep_figure(points, results, path, title=""):
    """r_alpha across a grid; for L = 2 against alpha_1, otherwise in the chart plane."""
    alpha = np.array([p.alpha for p in points])
    r = np.array([res.r_alpha for res in results], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    finite = np.isfinite(r)
    if alpha.shape[1] == 2:
        ax.plot(alpha[finite, 0], r[finite], "o-", ms=3)
        if (~finite).any():
            top = r[finite].max() if finite.any() else 1.0
            ax.plot(alpha[~finite, 0], np.full((~finite).sum(), top), "r^", label="no hit")
            ax.legend(frameon=False)
        ax.set_xlabel("alpha_1")
        ax.set_ylabel("r_alpha")
        if finite.any() and r[finite].max() > 0:
            ax.set_yscale("symlog", linthresh=1.0)
    else:
        sc = ax.scatter(alpha[finite, 0], alpha[finite, 1], c=np.log10(1 + r[finite]), s=12)
        ax.scatter(alpha[~finite, 0], alpha[~finite, 1], marker="x", c="r", s=16)
        fig.colorbar(sc, ax=ax, label="log10(1 + r_alpha)")
        ax.set_xlabel("alpha_1")
        ax.set_ylabel("alpha_2")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def search_figure(trace, path, title=""):
    """Bisection trace: achieved radius per shot."""
    fig, ax = plt.subplots(figsize=(6, 4))
    r = [t["r_alpha"] for t in trace]
    r = [x if math.isfinite(x) else float("nan") for x in r]
    ax.semilogy(range(1, len(r) + 1), r, "o-", ms=3)
    ax.set_xlabel("shot")
    ax.set_ylabel("r_alpha")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def profile_figure(sol, path, title=""):
    fig, ax = plt.subplots(figsize=(6, 4))
    r = np.linspace(0.0, sol.R, 400)
    u = sol.u(r)
    for i in range(u.shape[1]):
        ax.plot(r, u[:, i], label=f"u{i + 1}")
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("r")
    ax.set_ylabel("u")
    ax.legend(frameon=False)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
