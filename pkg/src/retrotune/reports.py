"""Delimited report files and matching matplotlib figures.

Every CSV written here has a figure twin so a run directory is readable
both by tooling and at a glance. Figures render with the Agg backend so the
CLI works headless.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .evaluation import CohesionReport, DriftReport, RecallReport


def write_objective_trace_csv(trace, path: str) -> None:
    """Columns: sweep (1-based), objective."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep", "objective"])
        for sweep, value in enumerate(trace, start=1):
            writer.writerow([sweep, repr(float(value))])


def write_loss_trace_csv(trace, path: str) -> None:
    """Columns: epoch (1-based), loss."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, value in enumerate(trace, start=1):
            writer.writerow([epoch, repr(float(value))])


def write_cohesion_csv(report: CohesionReport, path: str) -> None:
    """Columns: mean_edge_cosine, median_edge_cosine, edge_count."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mean_edge_cosine", "median_edge_cosine", "edge_count"])
        writer.writerow(
            [repr(report.mean_edge_cosine), repr(report.median_edge_cosine), report.edge_count]
        )


def write_recall_csv(report: RecallReport, path: str) -> None:
    """Columns: direction, k, recall; final row holds mean_recall with empty k."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["direction", "k", "recall"])
        for direction, by_k in report.recall.items():
            for k in report.ks:
                writer.writerow([direction, k, repr(by_k[k])])
        writer.writerow(["mean", "", repr(report.mean_recall)])


def write_drift_csv(vocab: list[str], report: DriftReport, path: str) -> None:
    """Columns: token, displacement; one row per word."""
    if len(vocab) != len(report.displacements):
        raise ValueError("vocab and displacement lengths differ")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token", "displacement"])
        for token, disp in zip(vocab, report.displacements):
            writer.writerow([token, repr(float(disp))])


def plot_objective_trace(trace, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(1, len(trace) + 1), trace, marker="o")
    ax.set_xlabel("sweep")
    ax.set_ylabel("objective")
    ax.set_title("retrofit objective per sweep")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_loss_traces(traces: dict[str, list[float]], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for run, trace in traces.items():
        ax.plot(range(1, len(trace) + 1), trace, label=run)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_title("training loss per task")
    if traces:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_recall_bars(report: RecallReport, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.38
    xs = np.arange(len(report.ks))
    for offset, (direction, by_k) in zip((-width / 2, width / 2), report.recall.items()):
        ax.bar(xs + offset, [by_k[k] for k in report.ks], width, label=direction)
    ax.set_xticks(xs, [f"R@{k}" for k in report.ks])
    ax.set_ylim(0, 1)
    ax.axhline(report.mean_recall, color="gray", linestyle="--", linewidth=1,
               label=f"mean {report.mean_recall:.3f}")
    ax.set_ylabel("recall")
    ax.set_title("retrieval recall")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_drift_histogram(displacements, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.asarray(displacements, dtype=float), bins=40)
    ax.set_xlabel("per-word displacement")
    ax.set_ylabel("words")
    ax.set_title("embedding drift")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
