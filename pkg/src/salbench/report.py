"""Plot-data export and figure rendering for a finished run.

Emits ``plots.json`` ({heatmaps, rank_bump}) plus PNG renderings of the
correlation heatmaps and the rank-bump chart under ``figures/``.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_data(report: dict) -> dict:
    """Heatmap and rank-bump series from a report dictionary."""
    heatmaps = []
    sources = list(report.get("correlations", {}).items()) + [
        (f"baselines_{m}", c)
        for m, c in report.get("baseline_ablation", {}).items()
    ]
    for name, corr in sources:
        heatmaps.append(
            {
                "name": name,
                "labels": corr["columns"],
                "tau": corr["tau"],
                "significant": corr["holm_mask_full"],
            }
        )
    rank_bump = []
    for col in report["columns"]:
        table = report.get("ranks", {}).get(col)
        if table is None:
            continue
        rank_bump.append(
            {
                "metric": col,
                "methods": report["methods"],
                "average_rank": table["average"],
            }
        )
    return {"heatmaps": heatmaps, "rank_bump": rank_bump}


def render_heatmap(entry: dict, path: Path) -> None:
    tau = np.asarray(entry["tau"], dtype=np.float64)
    labels = entry["labels"]
    significant = np.asarray(entry["significant"], dtype=bool)
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(labels)),) * 2)
    im = ax.imshow(tau, vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(len(labels)), labels, rotation=90, fontsize=7)
    ax.set_yticks(range(len(labels)), labels, fontsize=7)
    for i in range(len(labels)):
        for j in range(len(labels)):
            text = f"{tau[i, j]:.2f}"
            if i != j and significant[i, j]:
                text += "*"
            ax.text(j, i, text, ha="center", va="center", fontsize=6)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(entry["name"])
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_rank_bump(series: list[dict], path: Path) -> None:
    if not series:
        return
    methods = series[0]["methods"]
    metrics = [s["metric"] for s in series]
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(metrics)), 4))
    for m_idx, method in enumerate(methods):
        ranks = [s["average_rank"][m_idx] for s in series]
        ax.plot(range(len(metrics)), ranks, marker="o", label=method)
    ax.set_xticks(range(len(metrics)), metrics, rotation=90, fontsize=7)
    ax.invert_yaxis()  # rank 1 (best) on top
    ax.set_ylabel("average rank")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def emit(report: dict, out_dir: str | Path) -> dict:
    """Write plots.json and the rendered figures; returns the plot data."""
    out = Path(out_dir)
    data = plot_data(report)
    with open(out / "plots.json", "w") as fh:
        json.dump(data, fh, sort_keys=True, indent=2)
        fh.write("\n")
    figures = out / "figures"
    figures.mkdir(exist_ok=True)
    for entry in data["heatmaps"]:
        render_heatmap(entry, figures / f"heatmap_{entry['name']}.png")
    render_rank_bump(data["rank_bump"], figures / "rank_bump.png")
    return data
