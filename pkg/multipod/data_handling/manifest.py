"""Module for reading, writing, filtering and splitting manifests of labeled radiographs."""

import csv
import math
import re
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from multipod.constants import (
    MANIFEST_COLUMNS,
    MAX_AGE_YEARS,
    MIN_AGE_YEARS,
    SEED_MASK,
    STAGES,
    Sex,
    Stage,
)
from multipod.data_handling.packets.subject_record import Manifest, Roi, SubjectRecord
from multipod.errors import ManifestError

ROI_COLUMNS = ("roi_x", "roi_y", "roi_w", "roi_h")


def load_manifest(path: Path) -> Manifest:
    """
    Reads a manifest CSV. Relative image paths are resolved against the directory of the CSV.
    :param path: The manifest file.
    :return: One SubjectRecord per data row, in file order.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest file not found: {path}")

    try:
        # Everything is read as text so we can report exactly which cell is wrong
        df = pd.read_csv(path, dtype=str, keep_default_na=False, engine="c").fillna("")
    except pd.errors.ParserError as e:
        # The parser counts file lines from 1, with the header on line 1
        line = re.search(r"\bline (\d+)", str(e))
        row = int(line.group(1)) - 1 if line else None
        raise ManifestError(f"{path}: cannot parse CSV ({e})", row=row) from None
    except (pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ManifestError(f"{path}: cannot parse CSV ({e})") from None

    if tuple(df.columns) != MANIFEST_COLUMNS:
        raise ManifestError(
            f"{path}: header must be exactly {','.join(MANIFEST_COLUMNS)}", row=0
        )

    root = path.parent.resolve()
    records = []
    seen_paths: set[str] = set()
    out_of_range_rows = []
    for row_number, row in enumerate(df.itertuples(index=False), start=1):
        record = _parse_row(row._asdict(), row_number, root)
        if record.image_path in seen_paths:
            raise ManifestError(
                f"duplicate image path {record.image_path}", row=row_number, column="image_path"
            )
        seen_paths.add(record.image_path)
        if not MIN_AGE_YEARS <= record.age_years <= MAX_AGE_YEARS:
            out_of_range_rows.append(row_number)
        records.append(record)

    if out_of_range_rows:
        warnings.warn(
            f"{path}: {len(out_of_range_rows)} record(s) have an age outside "
            f"[{MIN_AGE_YEARS:g}, {MAX_AGE_YEARS:g}] years, first at row {out_of_range_rows[0]}",
            stacklevel=2,
        )

    return Manifest(records=tuple(records), source_tag=path.name)


def _parse_row(row: dict[str, str], row_number: int, root: Path) -> SubjectRecord:
    """
    Converts one text row of a manifest into a SubjectRecord.
    :param row: Column name to cell text.
    :param row_number: 1-based data row, for error messages.
    :param root: Directory relative image paths are resolved against.
    """
    image_path = row["image_path"].strip()
    if not image_path:
        raise ManifestError("empty image path", row=row_number, column="image_path")
    resolved = Path(image_path)
    if not resolved.is_absolute():
        resolved = (root / resolved).resolve()

    try:
        sex = Sex(row["sex"].strip())
    except ValueError:
        raise ManifestError(
            f"unknown sex '{row['sex']}', expected F or M", row=row_number, column="sex"
        ) from None

    try:
        age_years = float(row["age_years"])
    except ValueError:
        raise ManifestError(
            f"age '{row['age_years']}' is not a number", row=row_number, column="age_years"
        ) from None
    if not math.isfinite(age_years) or age_years < 0:
        raise ManifestError(
            f"age '{row['age_years']}' must be a finite non-negative number",
            row=row_number,
            column="age_years",
        )

    try:
        stage = Stage(row["stage"].strip())
    except ValueError:
        raise ManifestError(
            f"unknown stage '{row['stage']}', expected one of CS1..CS6",
            row=row_number,
            column="stage",
        ) from None

    roi_cells = [row[column].strip() for column in ROI_COLUMNS]
    roi = None
    if any(roi_cells):
        values = []
        for column, cell in zip(ROI_COLUMNS, roi_cells, strict=True):
            try:
                values.append(int(cell))
            except ValueError:
                raise ManifestError(
                    f"'{cell}' is not an integer (fill all four roi columns or none)",
                    row=row_number,
                    column=column,
                ) from None
        x, y, width, height = values
        if x < 0 or y < 0 or width <= 0 or height <= 0:
            raise ManifestError(
                "roi needs a non-negative origin and a positive size",
                row=row_number,
                column="roi_x",
            )
        roi = Roi(x=x, y=y, width=width, height=height)

    return SubjectRecord(
        image_path=str(resolved), sex=sex, age_years=age_years, stage=stage, roi=roi
    )


def save_manifest(manifest: Manifest, path: Path) -> Path:
    """
    Writes a manifest CSV. Image paths are written relative to the directory of the CSV so that a
    dataset directory can be moved as a whole.
    :param manifest: The records to write.
    :param path: The destination file. Parent directories are created.
    :return: The path written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = path.parent.resolve()
    with path.open(mode="w", newline="") as file_writer:
        writer = csv.writer(file_writer, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for record in manifest.records:
            image_path = Path(record.image_path)
            if image_path.is_absolute():
                image_path = image_path.relative_to(root, walk_up=True)
            roi = record.roi
            roi_cells = ["", "", "", ""] if roi is None else [roi.x, roi.y, roi.width, roi.height]
            writer.writerow(
                [
                    image_path.as_posix(),
                    record.sex.value,
                    repr(record.age_years),
                    record.stage.value,
                    *roi_cells,
                ]
            )
    return path


def filter_by_sex(manifest: Manifest, sex: Sex) -> Manifest:
    """
    Keeps the records of one sex, in their original order.
    """
    return Manifest(
        records=tuple(record for record in manifest.records if record.sex == sex),
        source_tag=f"{manifest.source_tag}[sex={sex.value}]",
    )


def class_histogram(manifest: Manifest) -> dict[Stage, int]:
    """
    Counts the records of every stage. Every stage is present in the result, possibly with 0.
    """
    counts = dict.fromkeys(STAGES, 0)
    for record in manifest.records:
        counts[record.stage] += 1
    return counts


def stratified_split(
    manifest: Manifest, train_fraction: float, seed: int
) -> tuple[Manifest, Manifest]:
    """
    Splits a manifest into train and test parts stage by stage. Each stage sends
    round(train_fraction * n_stage) records to train, ties rounding toward train, and the rest to
    test. Both parts keep the original record order.
    :param manifest: The records to split.
    :param train_fraction: Fraction of each stage that goes to train, in (0, 1).
    :param seed: Seed of the shuffle that picks which records of a stage go to train.
    :return: (train, test)
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")

    rng = np.random.default_rng(seed & SEED_MASK)
    indices_by_stage: dict[Stage, list[int]] = {stage: [] for stage in STAGES}
    for index, record in enumerate(manifest.records):
        indices_by_stage[record.stage].append(index)

    train_indices: list[int] = []
    for stage in STAGES:
        indices = indices_by_stage[stage]
        if not indices:
            continue
        if len(indices) < 2:
            raise ManifestError(f"stage {stage} has {len(indices)} record, at least 2 are needed")
        n_train = math.floor(train_fraction * len(indices) + 0.5)
        shuffled = rng.permutation(np.asarray(indices))
        train_indices.extend(int(index) for index in shuffled[:n_train])

    chosen = set(train_indices)
    train = tuple(r for i, r in enumerate(manifest.records) if i in chosen)
    test = tuple(r for i, r in enumerate(manifest.records) if i not in chosen)
    return (
        Manifest(records=train, source_tag=f"{manifest.source_tag}[train]"),
        Manifest(records=test, source_tag=f"{manifest.source_tag}[test]"),
    )
