"""Module for the ablation grids: train one network per grid row and tabulate the results."""

from pathlib import Path

import msgspec
import pandas as pd
from msgspec.structs import replace

from multipod.constants import (
    CURVES_FILE_NAME,
    RUNLOG_FILE_NAME,
    SWEEP_FILE_NAME,
    PodVariant,
    PolicyKind,
    SweepGrid,
)
from multipod.data_handling.packets.subject_record import Manifest
from multipod.display import TrainingDisplay
from multipod.evaluation.report import render_curves
from multipod.model.multipod_net import MultiPodConfig, build_model, param_count
from multipod.training.trainer import TrainConfig, train

SWEEP_COLUMNS = (
    "row",
    "variant",
    "directional_filters",
    "policy",
    "patch_aug",
    "params",
    "final_test_acc",
    "best_test_acc",
    "best_epoch",
)

FILTER_ABLATION = (
    (False, False, False),
    (False, True, False),
    (True, True, False),
    (False, True, True),
    (True, True, True),
)
"""(directional filters, whole-image augmentation, patch augmentation) of the filter grid rows."""


class SweepRow(msgspec.Struct, frozen=True):
    """
    One training run of a grid.
    """

    name: str
    model: MultiPodConfig
    train: TrainConfig


def _on_off(flag: bool) -> str:
    return "on" if flag else "off"


def sweep_rows(
    grid: SweepGrid, base_model: MultiPodConfig, base_train: TrainConfig
) -> list[SweepRow]:
    """
    The runs of a grid. Every row starts from the base configs and changes only what the grid
    varies.
    """
    match grid:
        case SweepGrid.PODS:
            return [
                SweepRow(variant.value, replace(base_model, variant=variant), base_train)
                for variant in PodVariant
            ]
        case SweepGrid.AUGMENT:
            return [
                SweepRow(
                    kind.value,
                    base_model,
                    replace(base_train, data_policy=replace(base_train.data_policy, kind=kind)),
                )
                for kind in PolicyKind
            ]
        case SweepGrid.FILTERS:
            rows = []
            for filters, data_aug, patch_aug in FILTER_ABLATION:
                kind = base_train.data_policy.kind if data_aug else PolicyKind.NONE
                if data_aug and kind is PolicyKind.NONE:
                    kind = PolicyKind.TRANSLATE_AUTOCONTRAST
                rows.append(
                    SweepRow(
                        f"filters-{_on_off(filters)}_data-{_on_off(data_aug)}"
                        f"_patch-{_on_off(patch_aug)}",
                        replace(base_model, use_directional_filters=filters),
                        replace(
                            base_train,
                            data_policy=replace(base_train.data_policy, kind=kind),
                            patch_aug=patch_aug,
                        ),
                    )
                )
            return rows
    raise ValueError(f"unknown grid '{grid}'")


def run_sweep(
    grid: SweepGrid,
    train_manifest: Manifest,
    test_manifest: Manifest,
    base_model: MultiPodConfig,
    base_train: TrainConfig,
    out_dir: Path,
    display: TrainingDisplay | None = None,
) -> pd.DataFrame:
    """
    Trains every row of a grid, each into its own sub-directory of out_dir, then writes
    sweep.csv (one line per row) and curves.png (test accuracy of every row).
    :return: The sweep table.
    """
    out_dir = Path(out_dir)
    table = []
    runlogs = {}
    for row in sweep_rows(grid, base_model, base_train):
        if display is not None:
            display.banner(f"sweep row {row.name}", {"model": row.model, "train": row.train})
        model = build_model(row.model)
        params = param_count(model)
        row_dir = out_dir / row.name
        _, run_log = train(model, train_manifest, test_manifest, row.train, row_dir, display)
        runlogs[row.name] = row_dir / RUNLOG_FILE_NAME
        table.append(
            {
                "row": row.name,
                "variant": row.model.variant.value,
                "directional_filters": row.model.use_directional_filters,
                "policy": row.train.data_policy.kind.value,
                "patch_aug": row.train.patch_aug,
                "params": params,
                "final_test_acc": round(run_log.final.test_acc, 8),
                "best_test_acc": round(run_log.best.test_acc, 8),
                "best_epoch": run_log.best.epoch,
            }
        )

    frame = pd.DataFrame(table, columns=list(SWEEP_COLUMNS))
    out_dir.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_dir / SWEEP_FILE_NAME, index=False, lineterminator="\n")
    render_curves(runlogs, out_dir / CURVES_FILE_NAME, title=f"Test accuracy, {grid} grid")
    return frame
