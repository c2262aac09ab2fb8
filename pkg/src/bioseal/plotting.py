"""Figures for the benchmark report.

Renders the CSV's content as files next to it: EBR and EER against attack
level (one line per attack kind) and the pooled genuine/impostor score
histogram. Everything draws through the Agg backend, so this works
headless; nothing here feeds back into the metrics.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import EvalReport


def _by_kind(rows):
    grouped: dict[str, list] = {}
    for row in rows:
        grouped.setdefault(row.attack_kind, []).append(row)
    for rows_of_kind in grouped.values():
        rows_of_kind.sort(key=lambda r: r.level)
    return grouped


def _curve_figure(rows, value, errorbar, ylabel, title, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for kind, kind_rows in sorted(_by_kind(rows).items()):
        levels = [r.level for r in kind_rows]
        values = [value(r) for r in kind_rows]
        if errorbar is not None:
            ax.errorbar(levels, values, yerr=[errorbar(r) for r in kind_rows],
                        marker="o", capsize=3, label=kind)
        else:
            ax.plot(levels, values, marker="o", label=kind)
    ax.set_xlabel("attack level")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _score_histogram(score_sets, bins, path):
    genuine = [s for ss in score_sets for s in ss.genuine]
    impostor = [s for ss in score_sets for s in ss.impostor]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.hist(genuine, bins=bins, range=(0.0, 1.0), alpha=0.6, density=True,
            label=f"genuine (n={len(genuine)})")
    ax.hist(impostor, bins=bins, range=(0.0, 1.0), alpha=0.6, density=True,
            label=f"impostor (n={len(impostor)})")
    ax.set_xlabel("normalized Hamming distance")
    ax.set_ylabel("density")
    ax.set_title("verification score distributions, pooled over the grid")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_report_figures(report: EvalReport, outdir, bins: int = 64) -> list[Path]:
    """Write ebr_vs_level.png, eer_vs_level.png and score_histogram.png."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [
        outdir / "ebr_vs_level.png",
        outdir / "eer_vs_level.png",
        outdir / "score_histogram.png",
    ]
    _curve_figure(report.rows, lambda r: r.mean_ebr, lambda r: r.std_ebr,
                  "mean EBR", "mark error bit rate under attack", paths[0])
    _curve_figure(report.rows, lambda r: r.eer, None,
                  "EER", "verification equal error rate under attack", paths[1])
    _score_histogram(report.score_sets, bins, paths[2])
    return paths
