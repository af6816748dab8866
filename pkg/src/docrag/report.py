"""Report rendering: delimited tables plus matplotlib figures on disk.

Every report path writes a machine-readable CSV next to the human-readable
text, and a PNG figure alongside both.
"""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .corpus import DISCUSSION_KINDS
from .evalkit import MetricsReport

METRIC_LABELS = {
    "accuracy": "Accuracy",
    "precision": "Precision",
    "recall": "Recall",
    "f1": "F1",
    "mean_llm_score": "LLMScore",
}


def write_metrics_csv(reports: dict[str, MetricsReport], path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", *METRIC_LABELS.values(), "mean_latency_s", "runs",
                         "TP", "TN", "FP", "FN"])
        for name, rep in reports.items():
            writer.writerow([
                name,
                *(getattr(rep, m) if getattr(rep, m) is not None else ""
                  for m in METRIC_LABELS),
                f"{rep.mean_latency:.4f}",
                rep.runs,
                rep.counts["TP"], rep.counts["TN"], rep.counts["FP"], rep.counts["FN"],
            ])


def render_metrics_figure(reports: dict[str, MetricsReport], path) -> None:
    """Grouped bar chart: one group per metric, one bar per report."""
    names = list(reports)
    metrics = list(METRIC_LABELS)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    width = 0.8 / max(len(names), 1)
    for i, name in enumerate(names):
        rep = reports[name]
        values = [getattr(rep, m) or 0.0 for m in metrics]
        positions = [j + i * width for j in range(len(metrics))]
        ax.bar(positions, values, width=width, label=name)
    ax.set_xticks([j + width * (len(names) - 1) / 2 for j in range(len(metrics))])
    ax.set_xticklabels([METRIC_LABELS[m] for m in metrics])
    ax.set_ylabel("%")
    ax.set_ylim(0, 105)
    ax.legend(fontsize="small")
    ax.set_title("Evaluation metrics")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_distribution_csv(table: dict[str, dict[str, float]], path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", *(f"{k}s_pct" for k in DISCUSSION_KINDS)])
        for category, per_kind in table.items():
            writer.writerow([
                category,
                *(f"{per_kind.get(kind, 0.0):.2f}" for kind in DISCUSSION_KINDS),
            ])


def format_distribution(table: dict[str, dict[str, float]]) -> str:
    header = f"{'Category':<18} {'Issues (%)':>12} {'Discussions (%)':>17}"
    lines = [header, "-" * len(header)]
    for category, per_kind in table.items():
        lines.append(
            f"{category:<18} {per_kind.get('issue', 0.0):>12.2f} "
            f"{per_kind.get('discussion', 0.0):>17.2f}"
        )
    return "\n".join(lines) + "\n"


def render_distribution_figure(table: dict[str, dict[str, float]], path) -> None:
    categories = list(table)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    width = 0.38
    xs = range(len(categories))
    ax.bar([x - width / 2 for x in xs],
           [table[c].get("issue", 0.0) for c in categories], width=width, label="Issues")
    ax.bar([x + width / 2 for x in xs],
           [table[c].get("discussion", 0.0) for c in categories], width=width, label="Discussions")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(categories, rotation=30, ha="right")
    ax.set_ylabel("% of kind")
    ax.set_title("Discussion categories by kind")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
