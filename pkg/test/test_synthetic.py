"""Tests for the synthetic dataset generator."""

from pathlib import Path

import numpy as np
import pytest

from multipod.constants import (
    NUM_STAGES,
    ROI_HEIGHT,
    ROI_WIDTH,
    SYNTHETIC_BACKGROUND,
    SYNTHETIC_BONE,
    STAGES,
)
from multipod.data_handling.manifest import class_histogram, filter_by_sex, load_manifest
from multipod.data_handling.packets.subject_record import Manifest
from multipod.data_handling.synthetic import (
    SyntheticConfig,
    generate_synthetic,
    render_spine,
    stage_geometry,
)
from multipod.errors import ConfigError
from multipod.pipeline.image_ops import load_image, prepare_record

# Rendering at eight times the region-of-interest resolution makes border positions sub-pixel
SCALE = 8
C2_ROWS = 28
"""The C2 body lies above this row and the C3 body below it, in region-of-interest pixels."""


def measured_concavity(stage_index: int) -> float:
    """Height of the C2 body at 3/4 of its half width minus its height at the middle."""
    geometry = stage_geometry(stage_index)
    img = render_spine(geometry, ROI_HEIGHT * SCALE, ROI_WIDTH * SCALE)
    coverage = (img - SYNTHETIC_BACKGROUND) / (SYNTHETIC_BONE - SYNTHETIC_BACKGROUND)
    heights = coverage[: C2_ROWS * SCALE].sum(axis=0) / SCALE
    center = ROI_WIDTH / 2
    middle_column = int(center * SCALE)
    side_column = int((center + 0.75 * geometry.body_width / 2) * SCALE)
    return float(heights[side_column] - heights[middle_column])


def test_geometry_is_monotone():
    geometries = [stage_geometry(k) for k in range(NUM_STAGES)]
    assert geometries[-1].concavity > geometries[0].concavity
    for lower, upper in zip(geometries, geometries[1:], strict=False):
        assert upper.concavity > lower.concavity
        assert upper.aspect_ratio > lower.aspect_ratio
    with pytest.raises(ValueError, match="stage index"):
        stage_geometry(NUM_STAGES)


def test_measured_concavity_increases_with_stage():
    depths = [measured_concavity(k) for k in range(NUM_STAGES)]
    assert all(b > a for a, b in zip(depths, depths[1:], strict=False)), depths
    assert depths[0] > 0


def test_one_image_per_stage(tmp_path: Path):
    manifest, manifest_path = generate_synthetic(
        SyntheticConfig(per_stage_count=1, noise_level=0.0), tmp_path
    )
    assert len(manifest) == NUM_STAGES
    assert [record.stage for record in manifest.records] == list(STAGES)
    assert load_manifest(manifest_path) == Manifest(
        records=manifest.records, source_tag=manifest_path.name
    )
    for record in manifest.records:
        img = load_image(record.image_path)
        assert img.shape == (ROI_HEIGHT, ROI_WIDTH, 1)
        assert record.roi is None


def test_same_config_same_bytes(tmp_path: Path):
    cfg = SyntheticConfig(per_stage_count=2, seed=21)
    first, _ = generate_synthetic(cfg, tmp_path / "a")
    second, _ = generate_synthetic(cfg, tmp_path / "b")
    for a, b in zip(first.records, second.records, strict=True):
        assert Path(a.image_path).read_bytes() == Path(b.image_path).read_bytes()
        assert a.age_years == b.age_years
    assert (tmp_path / "a" / "manifest.csv").read_bytes() == (
        tmp_path / "b" / "manifest.csv"
    ).read_bytes()


def test_seed_changes_images(tmp_path: Path):
    first, _ = generate_synthetic(SyntheticConfig(per_stage_count=1, seed=1), tmp_path / "a")
    second, _ = generate_synthetic(SyntheticConfig(per_stage_count=1, seed=2), tmp_path / "b")
    assert Path(first.records[0].image_path).read_bytes() != Path(
        second.records[0].image_path
    ).read_bytes()


def test_ages_follow_the_age_model(tmp_path: Path):
    cfg = SyntheticConfig(per_stage_count=100, age_model=(6.0, 2.0, 1.0), noise_level=0.0)
    manifest, manifest_path = generate_synthetic(cfg, tmp_path)
    ages = np.array([record.age_years for record in manifest.records])
    assert ages.min() >= 6.0
    assert ages.max() <= 18.0

    reloaded = load_manifest(manifest_path)
    assert len(reloaded) == 600
    assert set(class_histogram(reloaded).values()) == {100}
    for record in reloaded.records:
        low = 6.0 + 2.0 * record.stage.index
        assert low <= record.age_years <= low + 1.0


def test_sexes_alternate(tmp_path: Path):
    manifest, _ = generate_synthetic(SyntheticConfig(per_stage_count=5, noise_level=0.0), tmp_path)
    assert len(filter_by_sex(manifest, manifest.records[1].sex)) == 15
    assert manifest.records[0].sex != manifest.records[1].sex


def test_stored_roi_mode(tmp_path: Path):
    manifest, _ = generate_synthetic(
        SyntheticConfig.with_stored_roi(1, noise_level=0.0, seed=3), tmp_path
    )
    record = manifest.records[0]
    assert record.roi is not None
    assert load_image(record.image_path).shape == (154, 70, 1)

    roi = prepare_record(record)
    assert roi.shape == (ROI_HEIGHT, ROI_WIDTH, 1)
    # The bright column beside the spine must not leak into the crop
    assert roi[:, -1].max() < SYNTHETIC_BONE


def test_with_roi_tiles_like_the_cropped_mode(tmp_path: Path):
    cropped, _ = generate_synthetic(
        SyntheticConfig(per_stage_count=1, noise_level=0.0, seed=8), tmp_path / "a"
    )
    stored, _ = generate_synthetic(
        SyntheticConfig.with_stored_roi(1, noise_level=0.0, seed=8), tmp_path / "b"
    )
    a = prepare_record(cropped.records[-1])
    b = prepare_record(stored.records[-1])
    assert np.abs(a - b).mean() < 10.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"per_stage_count": 0},
        {"per_stage_count": 1, "image_size": (34, 35)},
        {"per_stage_count": 1, "noise_level": -1.0},
        {"per_stage_count": 1, "age_model": (6.0, 1.0, -1.0)},
    ],
)
def test_bad_config(kwargs: dict):
    with pytest.raises(ConfigError):
        SyntheticConfig(**kwargs)
