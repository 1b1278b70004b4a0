"""Report figures written next to the CLI's tabular output."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .models.metrics import HITS_KS, chance_baselines  # noqa: E402

PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=PNG_META)
    plt.close(fig)
    return path


def plot_stats(stats: dict, path) -> Path:
    fig, axes = plt.subplots(2, 2, figsize=(12, 8))
    for ax, key, title in ((axes[0, 0], "per_genre", "Songs per genre"), (axes[0, 1], "per_style", "Songs per style"),
                           (axes[1, 0], "temperature_histogram", "Temperature"),
                           (axes[1, 1], "mood_histogram", "Mood")):
        counts = stats[key]
        ax.bar(range(len(counts)), list(counts.values()), color="#3182bd")
        ax.set_xticks(range(len(counts)))
        ax.set_xticklabels(list(counts), rotation=60, ha="right", fontsize=7)
        ax.set_title(title)
        ax.set_ylabel("songs")
    return _save(fig, path)


def plot_class_f1(report, path) -> Path:
    names = list(report.per_class)
    f1 = [report.per_class[n]["f1"] for n in names]
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(names) + 2), 4))
    ax.bar(range(len(names)), f1, color="#e6550d")
    ax.axhline(1.0 / max(len(names), 1), color="k", ls="--", lw=1, label="chance")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("F1")
    ax.set_title(f"{report.task}: weighted F1 {report.metrics['weighted_f1']:.3f}")
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_ranking(report, path) -> Path:
    hist = report.per_class["rank_histogram"]
    chance = chance_baselines("ranking")
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(11, 4))
    a1.bar(range(1, len(hist) + 1), hist, color="#31a354")
    a1.set_xlabel("rank of true continuation")
    a1.set_ylabel("queries")
    a1.set_title(f"MAP {report.metrics['MAP']:.3f} (chance {chance['MAP']:.3f})")
    ks = list(HITS_KS)
    a2.plot(ks, [report.metrics[f"HITS@{k}"] for k in ks], "o-", label="model")
    a2.plot(ks, [chance[f"HITS@{k}"] for k in ks], "s--", color="gray", label="chance")
    a2.set_xlabel("k")
    a2.set_ylabel("HITS@k")
    a2.set_ylim(0, 1.05)
    a2.legend()
    return _save(fig, path)
