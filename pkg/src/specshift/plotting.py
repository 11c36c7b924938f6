"""Static figures for CLI reports (Agg backend, deterministic PNG output)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.2),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "lines.linewidth": 1.2,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    # strip the software/date tags so repeated runs give identical bytes
    fig.savefig(p, format="png", metadata={"Software": None})
    plt.close(fig)
    return p


def plot_ssf(xi, path, title: str | None = None, clip: float | None = 50.0) -> Path:
    """Real and imaginary parts of a sample against its grid."""
    x = np.asarray(xi.grid)
    v = np.asarray(xi.values)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        mask = np.ones(x.shape, dtype=bool)
        if xi.domain == "line" and clip is not None:
            mask = np.abs(x) <= clip
        ax.plot(x[mask], v.real[mask], label="Re xi")
        if np.any(np.abs(v.imag) > 0):
            ax.plot(x[mask], v.imag[mask], label="Im xi", linestyle="--")
        ax.set_xlabel("theta" if xi.domain == "circle" else "t")
        ax.set_ylabel("xi")
        ax.legend(loc="best")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_residuals(labels, residuals, path, title: str | None = None) -> Path:
    """Bar chart of trace-formula residuals on a log scale."""
    r = np.maximum(np.asarray(residuals, dtype=float), 1e-18)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(range(len(r)), r)
        ax.set_xticks(range(len(r)))
        ax.set_xticklabels(labels)
        ax.set_yscale("log")
        ax.set_ylabel("|trace - integral|")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_matrix(M, path, title: str | None = None) -> Path:
    """Entry moduli of a matrix, e.g. a dilation."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 4.2))
        im = ax.imshow(np.abs(np.asarray(M)), cmap="viridis", interpolation="nearest")
        fig.colorbar(im, ax=ax)
        ax.grid(False)
        if title:
            ax.set_title(title)
        return _save(fig, path)
