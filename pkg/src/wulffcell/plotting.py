"""SVG figures for Frank diagrams, Wulff shapes, optimizer traces and images."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "wulffcell"
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps the SVG output byte-identical across runs
_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_frank(fd, path, title=None, circle=True):
    pts = fd.points
    closed = np.vstack([pts, pts[:1]])
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if circle:
        t = np.linspace(0, 2 * np.pi, 361)
        ax.plot(np.cos(t), np.sin(t), color="0.75", lw=0.8, label="unit circle")
    ax.plot(closed[:, 0], closed[:, 1], color="C0", lw=1.4, label=r"$\{\varphi \leq 1\}$")
    ax.set_aspect("equal")
    ax.axhline(0, color="0.85", lw=0.5)
    ax.axvline(0, color="0.85", lw=0.5)
    ax.legend(loc="upper right", fontsize=8)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_wulff(poly, path, title=None):
    V = np.asarray(poly.vertices)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if len(V) >= 2:
        closed = np.vstack([V, V[:1]])
        ax.fill(closed[:, 0], closed[:, 1], color="C1", alpha=0.25)
        ax.plot(closed[:, 0], closed[:, 1], color="C1", lw=1.4)
    ax.plot(V[:, 0], V[:, 1], "o", color="C3", ms=3)
    ax.set_aspect("equal")
    ax.set_title(title or f"Wulff shape, {len(V)} vertices")
    _save(fig, path)


def plot_trace(trace, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for r, rec in enumerate(trace.restarts):
        ax.semilogy(np.maximum(rec.loss, 1e-300), lw=0.8,
                    color="C3" if r == trace.best_restart else "0.6")
    ax.set_xlabel("accepted step")
    ax.set_ylabel("loss")
    _save(fig, path)


def plot_image(u, path, title=None):
    u = np.asarray(getattr(u, "values", u))
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.imshow(u.T, origin="lower", cmap="gray", interpolation="nearest")
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    _save(fig, path)
