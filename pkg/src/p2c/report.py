"""Report rendering: delimited (CSV) outputs plus matplotlib figures.

Every report-producing command can write a machine-readable CSV and a
figure next to it (``--report-dir``): verify draws source vs replayed
boxes, eval renders the image pair with an absolute-difference map, and
eval-types charts per-label F1.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.patches as mpatches
import matplotlib.pyplot as plt

from .metrics import RasterImage, SimilarityReport
from .model import Rect
from .recognition import ClassificationReport
from .replay import NodeDeviation


def write_deviation_csv(path: str | Path, deviations: Sequence[NodeDeviation]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["node_id", "classname", "src_x", "src_y", "src_w", "src_h",
             "out_x", "out_y", "out_w", "out_h", "deviation_px"]
        )
        for d in deviations:
            writer.writerow(
                [
                    d.node_id,
                    d.classname,
                    d.source.x,
                    d.source.y,
                    d.source.w,
                    d.source.h,
                    d.replayed.x,
                    d.replayed.y,
                    d.replayed.w,
                    d.replayed.h,
                    f"{d.deviation:.4f}",
                ]
            )
    return path


def write_deviation_figure(
    path: str | Path, deviations: Sequence[NodeDeviation], canvas: Rect
) -> Path:
    """Overlay of source rects (solid) and replayed rects (dashed)."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 8 * max(canvas.h, 1) / max(canvas.w, 1)))
    for d in deviations:
        ax.add_patch(
            mpatches.Rectangle(
                (d.source.x, d.source.y), d.source.w, d.source.h,
                fill=False, edgecolor="tab:blue", linewidth=1.0,
            )
        )
        ax.add_patch(
            mpatches.Rectangle(
                (d.replayed.x, d.replayed.y), d.replayed.w, d.replayed.h,
                fill=False, edgecolor="tab:red", linewidth=1.0, linestyle="--",
            )
        )
    ax.set_xlim(0, canvas.w)
    ax.set_ylim(canvas.h, 0)  # canvas y grows downward
    ax.set_aspect("equal")
    ax.set_title("source (blue) vs replayed (red, dashed)")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def write_similarity_csv(path: str | Path, report: SimilarityReport) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ssim", "psnr_db", "psnr_infinite", "mse"])
        writer.writerow(
            [
                f"{report.ssim:.6f}",
                "" if report.psnr_infinite else f"{report.psnr:.6f}",
                report.psnr_infinite,
                f"{report.mse:.8f}",
            ]
        )
    return path


def write_similarity_figure(
    path: str | Path, ref: RasterImage, render: RasterImage, report: SimilarityReport
) -> Path:
    """Reference, render, and their absolute grayscale difference."""
    path = Path(path)
    ga = ref.to_gray().pixels[:, :, 0]
    gb = render.to_gray().pixels[:, :, 0]
    fig, axes = plt.subplots(1, 3, figsize=(12, 4.5))
    for ax, img, title in (
        (axes[0], ref.pixels, "reference"),
        (axes[1], render.pixels, "render"),
    ):
        ax.imshow(img.squeeze(), cmap="gray" if img.shape[2] == 1 else None, vmin=0, vmax=1)
        ax.set_title(title)
        ax.axis("off")
    if ga.shape == gb.shape:
        im = axes[2].imshow(abs(ga - gb), cmap="magma", vmin=0, vmax=1)
        fig.colorbar(im, ax=axes[2], fraction=0.046)
    axes[2].set_title(f"|diff| (ssim={report.ssim:.3f}, mse={report.mse:.4f})")
    axes[2].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def write_type_metrics_csv(path: str | Path, report: ClassificationReport) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "tp", "fp", "fn", "support", "precision", "recall", "f1"])
        for label, m in report.per_label.items():
            writer.writerow(
                [label, m.tp, m.fp, m.fn, m.support,
                 f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}"]
            )
        writer.writerow(
            ["macro", "", "", "", "",
             f"{report.macro_precision:.6f}", f"{report.macro_recall:.6f}", f"{report.macro_f1:.6f}"]
        )
        writer.writerow(
            ["weighted", "", "", "", "",
             f"{report.weighted_precision:.6f}", f"{report.weighted_recall:.6f}", f"{report.weighted_f1:.6f}"]
        )
    return path


def write_type_metrics_figure(path: str | Path, report: ClassificationReport) -> Path:
    """Horizontal bar chart of per-label F1 (supported labels only)."""
    path = Path(path)
    labels = [l for l, m in report.per_label.items() if m.support > 0 or m.fp > 0]
    scores = [report.per_label[l].f1 for l in labels]
    fig, ax = plt.subplots(figsize=(7, max(2.0, 0.4 * len(labels) + 1.2)))
    ax.barh(range(len(labels)), scores, color="tab:blue")
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlim(0, 1.0)
    ax.set_xlabel("F1")
    ax.set_title(f"per-label F1 (macro {report.macro_f1:.3f}, weighted {report.weighted_f1:.3f})")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
