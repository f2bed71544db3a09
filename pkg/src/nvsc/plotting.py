"""Static SVG figures of a run, rendered off-screen."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "nvsc"
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import lyapunov_series, platoon_positions  # noqa: E402
from .engine import SimTrace  # noqa: E402

CHANNELS = ("position error [m]", "velocity error [m/s]", "acceleration error [m/s^2]")


def _shade_attacks(ax, trace: SimTrace):
    h = trace.packet_period
    for i in range(trace.n_followers):
        col = trace.blocked[:, i]
        if not col.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate([[0], col.astype(np.int8), [0]])))
        for a, b in zip(edges[::2], edges[1::2]):
            ax.axvspan(trace.t[a], trace.t[b - 1] + h, color="0.85", lw=0)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_errors(trace: SimTrace, path) -> Path:
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 7))
    for l, ax in enumerate(axes):
        _shade_attacks(ax, trace)
        for i in range(trace.n_followers):
            ax.plot(trace.t, trace.E[:, i, l], lw=0.8, label=f"vehicle {i + 1}")
        ax.set_ylabel(CHANNELS[l])
    axes[0].legend(fontsize="small", ncol=3)
    axes[-1].set_xlabel("time [s]")
    return _save(fig, path)


def plot_lyapunov(trace: SimTrace, P, path) -> Path:
    V, V_o = lyapunov_series(trace, P)
    fig, (a1, a2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    for i in range(trace.n_followers):
        a1.semilogy(trace.t, np.maximum(V[:, i], 1e-12), lw=0.8, label=f"vehicle {i + 1}")
        a2.semilogy(trace.t, np.maximum(V_o[:, i], 1e-12), lw=0.8)
    a1.set_ylabel("tracking V")
    a2.set_ylabel("observer V")
    a2.set_xlabel("time [s]")
    a1.legend(fontsize="small", ncol=3)
    return _save(fig, path)


def plot_spacing(trace: SimTrace, path) -> Path:
    p = platoon_positions(trace)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    _shade_attacks(ax, trace)
    for i in range(p.shape[1] - 1):
        ax.plot(trace.t, p[:, i] - p[:, i + 1], lw=0.8, label=f"{i} to {i + 1}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("spacing [m]")
    ax.legend(fontsize="small", ncol=3)
    return _save(fig, path)


def plot_run(trace: SimTrace, P, out_dir) -> list[Path]:
    out = Path(out_dir)
    return [plot_errors(trace, out / "errors.svg"), plot_lyapunov(trace, P, out / "lyapunov.svg"),
            plot_spacing(trace, out / "spacing.svg")]


def plot_sweep(rows: list[dict], path) -> Path:
    counts = [r["neurons"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for key in ("e1", "e2", "e3"):
        ax.semilogy(counts, [max(r[key], 1e-12) for r in rows], marker="o", label=f"|{key}|")
    ax.set_xlabel("neurons per channel")
    ax.set_ylabel("final error (max over vehicles)")
    ax.legend()
    return _save(fig, path)
