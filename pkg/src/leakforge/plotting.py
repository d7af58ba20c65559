"""Figures written next to the CSV outputs. Uses the non-interactive Agg backend."""
from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .fileio import atomic_write  # noqa: E402

ARM_LABELS = {"none": "None", "random": "Random Enhanced", "clustered": "Clustered Enhanced"}
ARM_COLORS = {"none": "#7f7f7f", "random": "#1f77b4", "clustered": "#d62728"}

_RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 7,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "leakforge",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "png"
    buf = io.BytesIO()
    fig.savefig(buf, format=fmt, dpi=150, bbox_inches="tight",
                metadata={"Software": None} if fmt == "png" else None)
    plt.close(fig)
    return atomic_write(path, buf.getvalue())


def plot_zipf_overlay(rows, path, label_every: int = 0) -> Path:
    """Client volumes in rank order as bars, the attacker's volume for the same stem beside them."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7.0, 3.2))
        ranks = [r["rank"] for r in rows]
        ax.bar(ranks, [r["client_relfreq"] for r in rows], width=1.0, color="#1f77b4",
               alpha=0.8, label="client")
        ax.plot(ranks, [r["attacker_relfreq"] for r in rows], "o", ms=2.0, color="#d62728",
                label="attacker (same stem)")
        ax.set_xlabel("client rank")
        ax.set_ylabel("document frequency")
        ax.set_xlim(0.5, max(ranks, default=1) + 0.5)
        if label_every:
            ticks = ranks[::label_every]
            ax.set_xticks(ticks)
            ax.set_xticklabels([rows[t - 1]["stem"] for t in ticks], rotation=90)
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_arm_scores(report, path) -> Path:
    """Per-repeat Jaccard@k for each arm, with the arm mean marked."""
    arms = list(report["arms"])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        for x, arm in enumerate(arms):
            scores = report["arms"][arm]["scores"]
            ax.plot([x] * len(scores), scores, "o", ms=3, alpha=0.6, color=ARM_COLORS.get(arm))
            if scores:
                ax.hlines(sum(scores) / len(scores), x - 0.25, x + 0.25, color="k", lw=1.2)
        ax.set_xticks(range(len(arms)))
        ax.set_xticklabels([ARM_LABELS.get(a, a) for a in arms])
        ax.set_ylabel(f"Jaccard@{report['config']['k']}")
        return _save(fig, path)


def plot_sweep(rows, path) -> Path:
    """Grouped bars of the mean score per arm for every sweep row."""
    columns = [("none", "none"), ("random", "random_enhanced"), ("clustered", "clustered_enhanced")]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(rows) + 1.5), 3.0))
        width = 0.27
        for j, (arm, col) in enumerate(columns):
            xs = [i + (j - 1) * width for i in range(len(rows))]
            ys = [r[col] if r[col] is not None else 0.0 for r in rows]
            ax.bar(xs, ys, width=width, color=ARM_COLORS[arm], label=ARM_LABELS[arm])
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels([f"{r['model']}\n{r['attacker_real']}/{r['attacker_synthetic']}/{r['client']}"
                            for r in rows])
        ax.set_ylabel("mean Jaccard")
        ax.legend(frameon=False, ncol=3, loc="upper left", bbox_to_anchor=(0, 1.15))
        return _save(fig, path)
