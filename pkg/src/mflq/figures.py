"""Matplotlib renderings written next to the CSV artifacts.

Everything uses the Agg backend; figures are a reporting convenience and
carry no data the CSVs do not.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def riccati_paths(grid, P, K, Pi, path):
    n = P.shape[1]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2), sharex=True)
    for ax, arr, name in zip(axes, (P, K, Pi), ("P", "K", "Pi")):
        for i in range(n):
            for j in range(i, n):
                ax.plot(grid, arr[:, i, j], lw=1.2,
                        label=f"{name}[{i + 1},{j + 1}]")
        ax.set_xlabel("t")
        ax.set_title(name)
        ax.legend(fontsize=7)
    _save(fig, path)


def mean_field(grid, xbar, s, path):
    n = xbar.shape[1]
    fig, axes = plt.subplots(1, 2, figsize=(8.5, 3.2), sharex=True)
    for i in range(n):
        axes[0].plot(grid, xbar[:, i], lw=1.2, label=f"xbar[{i + 1}]")
        axes[1].plot(grid, s[:, i], lw=1.2, label=f"s[{i + 1}]")
    axes[0].set_title("mean-field path")
    axes[1].set_title("offset")
    for ax in axes:
        ax.set_xlabel("t")
        ax.legend(fontsize=8)
    _save(fig, path)


def tracking(grid, xbar, xN_mean, path):
    """Mean-field path against the averaged empirical mean."""
    n = xbar.shape[1]
    fig, ax = plt.subplots(figsize=(6.5, 3.6))
    for i in range(n):
        ax.plot(grid, xbar[:, i], lw=1.4, label=f"xbar[{i + 1}]")
        ax.plot(grid, xN_mean[:, i], lw=1.0, ls="--",
                label=f"mean x_avg[{i + 1}]")
    ax.set_xlabel("t")
    ax.set_title("mean-field consistency")
    ax.legend(fontsize=8)
    _save(fig, path)


def agent_states(grid, states, component, path):
    """All agents of one replication, one state component per figure."""
    fig, ax = plt.subplots(figsize=(6.5, 3.6))
    for i in range(states.shape[0]):
        ax.plot(grid, states[i, :, component], lw=0.6, alpha=0.7)
    ax.set_xlabel("t")
    ax.set_title(f"agent state component {component + 1}")
    _save(fig, path)


def sweep_curves(Ns, epsilon, consistency, path_eps, path_cons):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(Ns, epsilon, "o-")
    ax.set_xlabel("N")
    ax.set_ylabel("epsilon")
    ax.set_title("optimality gap vs population size")
    _save(fig, path_eps)

    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.loglog(Ns, consistency, "o-", label="consistency")
    ref = consistency[0] * np.asarray(Ns, dtype=float) ** -1.0 \
        / (Ns[0] ** -1.0)
    ax.loglog(Ns, ref, "k:", label="slope -1")
    ax.set_xlabel("N")
    ax.set_ylabel("discounted consistency error")
    ax.legend(fontsize=8)
    _save(fig, path_cons)


def deviation(grid, dev, path):
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.semilogy(grid, np.maximum(dev, 1e-300), lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("max |x_a - x_b|")
    ax.set_title("co-simulated law deviation")
    _save(fig, path)
