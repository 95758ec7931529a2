"""Module for exporting evaluation reports and rendering training curves."""

from collections.abc import Mapping
from pathlib import Path

import msgspec
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from multipod.constants import (
    CONFUSION_FILE_NAME,
    HEATMAP_FILE_NAME,
    REPORT_FILE_NAME,
    STAGES,
)
from multipod.data_handling.logger import read_runlog
from multipod.data_handling.packets.eval_report_packet import EvalReport

CONFUSION_INDEX_LABEL = "true/predicted"
"""Top-left cell of confusion.csv."""


def confusion_frame(report: EvalReport) -> pd.DataFrame:
    """The confusion matrix with stage names on both axes, CS1 first."""
    names = [stage.value for stage in STAGES]
    frame = pd.DataFrame(report.confusion, index=names, columns=names)
    frame.index.name = CONFUSION_INDEX_LABEL
    return frame


def read_confusion(path: Path) -> pd.DataFrame:
    """Reads a confusion.csv back."""
    return pd.read_csv(path, index_col=0)


def render_confusion(report: EvalReport, path: Path) -> Path:
    """
    Draws the confusion matrix as an annotated heatmap, true stages down and predicted stages
    across.
    """
    confusion = np.asarray(report.confusion)
    names = [stage.value for stage in STAGES]
    fig = Figure(figsize=(5.5, 5))
    ax = fig.subplots()
    image = ax.imshow(confusion, cmap="Blues", vmin=0)
    fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
    ax.set_xticks(range(len(names)), labels=names)
    ax.set_yticks(range(len(names)), labels=names)
    ax.set_xlabel("Predicted stage")
    ax.set_ylabel("True stage")
    ax.set_title(f"Accuracy {report.accuracy:.2%} (n={report.n})")
    threshold = confusion.max() / 2 if confusion.size else 0
    for row in range(confusion.shape[0]):
        for column in range(confusion.shape[1]):
            count = confusion[row, column]
            ax.text(
                column,
                row,
                str(count),
                ha="center",
                va="center",
                color="white" if count > threshold else "black",
            )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path


def export_report(report: EvalReport, out_dir: Path, heatmap: bool = True) -> list[Path]:
    """
    Writes report.json, confusion.csv and, unless disabled, the confusion heatmap.
    :return: The paths written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report_path = out_dir / REPORT_FILE_NAME
    report_path.write_bytes(msgspec.json.format(msgspec.json.encode(report), indent=2) + b"\n")

    confusion_path = out_dir / CONFUSION_FILE_NAME
    confusion_frame(report).to_csv(confusion_path, lineterminator="\n")

    paths = [report_path, confusion_path]
    if heatmap:
        paths.append(render_confusion(report, out_dir / HEATMAP_FILE_NAME))
    return paths


def render_curves(runlogs: Mapping[str, Path], path: Path, title: str = "Test accuracy") -> Path:
    """
    Plots test accuracy against the epoch for one or more runs.
    :param runlogs: Legend label -> runlog.csv of the run.
    :param path: The PNG to write.
    """
    fig = Figure(figsize=(7, 4.5))
    ax = fig.subplots()
    for label, runlog_path in runlogs.items():
        frame = read_runlog(runlog_path)
        ax.plot(frame["epoch"] + 1, frame["test_acc"] * 100, label=label)
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Test accuracy (%)")
    ax.set_title(title)
    ax.grid(visible=True, alpha=0.3)
    if len(runlogs) > 1:
        ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    return path
