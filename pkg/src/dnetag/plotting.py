"""Matplotlib figures written next to the text reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import SECTIONS  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "svg.hashsalt": "dnetag",
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def plot_loss_curves(traces, path):
    """Mean training nll per epoch, one line per run."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        for label, trace in traces.items():
            ax.plot(np.arange(1, len(trace) + 1), trace, marker="o", ms=3, label=label)
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean sentence nll")
        ax.set_yscale("log")
        if len(traces) > 1:
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_fold_f1(summaries, path):
    """Mean F1 per section with fold standard deviation as error bars."""
    labels = list(summaries)
    x = np.arange(len(SECTIONS))
    width = 0.8 / max(len(labels), 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        for i, label in enumerate(labels):
            s = summaries[label]
            means = [s.mean[f"{name}.f1"] for name, _ in SECTIONS]
            stds = [s.std[f"{name}.f1"] for name, _ in SECTIONS]
            ax.bar(x + (i - (len(labels) - 1) / 2) * width, means, width, yerr=stds,
                   capsize=2, label=label)
        ax.set_xticks(x, [name for name, _ in SECTIONS])
        ax.set_ylabel("F1 (%)")
        ax.set_ylim(0, 105)
        ax.legend(frameon=False, fontsize=7)
        return _save(fig, path)


def plot_fold_scatter(summaries, path, key="N-tag.f1"):
    """Per-fold values of one metric for each system."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        for i, (label, s) in enumerate(summaries.items()):
            vals = s.values(key)
            ax.scatter(np.full(len(vals), i), vals, s=12)
            ax.hlines(s.mean[key], i - 0.25, i + 0.25)
        ax.set_xticks(range(len(summaries)), list(summaries))
        ax.set_ylabel(key)
        return _save(fig, path)
