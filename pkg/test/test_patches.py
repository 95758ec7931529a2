"""Tests for cutting regions of interest into vertebra patches."""

from pathlib import Path

import numpy as np
import pytest

from multipod.errors import ShapeError
from multipod.model.filters import build_bank
from multipod.pipeline import patches as patches_module
from multipod.pipeline.image_ops import as_buffer, load_image
from multipod.pipeline.patches import (
    PatchSet,
    augment_patchset,
    export_patches,
    extract_patches,
    patch_offsets,
    patchset_to_array,
    stack_patches,
    unstack_patches,
)


def constant_patchset(*values: float) -> PatchSet:
    return PatchSet(patches=tuple(as_buffer(np.full((35, 35), value)) for value in values))


@pytest.mark.parametrize(
    ("args", "expected"),
    [((77, 35, 3), [0, 21, 42]), ((35, 35, 3), [0, 0, 0]), ((77, 35, 2), [0, 42])],
)
def test_patch_offsets(args: tuple[int, int, int], expected: list[int]):
    assert patch_offsets(*args) == expected


def test_patch_offsets_rejects_bad_geometry():
    with pytest.raises(ValueError, match="window"):
        patch_offsets(77, 35, 1)
    with pytest.raises(ValueError, match="fit"):
        patch_offsets(30, 35, 3)


def test_band_means():
    img = np.zeros((77, 35))
    img[0:35] = 10.0
    img[21:56] = 20.0
    img[42:77] = 30.0
    # Each window starts inside its own band, but the later bands overwrite the overlaps
    patches = extract_patches(as_buffer(img)).patches
    assert [float(p[0, 0, 0]) for p in patches] == [10.0, 20.0, 30.0]
    assert float(patches[2].mean()) == 30.0


def test_zero_image():
    for patch in extract_patches(as_buffer(np.zeros((77, 35)))).patches:
        assert patch.shape == (35, 35, 1)
        assert not patch.any()


def test_row_ramp_top_left_pixels():
    ramp = as_buffer(np.repeat(np.arange(77, dtype=np.float64)[:, np.newaxis], 35, axis=1))
    patches = extract_patches(ramp).patches
    assert [int(p[0, 0, 0]) for p in patches] == patch_offsets()


def test_overlap_rows_agree(rng: np.random.Generator):
    patches = extract_patches(as_buffer(rng.uniform(0, 255, size=(77, 35)))).patches
    assert np.array_equal(patches[0][21:35], patches[1][0:14])
    assert np.array_equal(patches[1][21:35], patches[2][0:14])


def test_extract_needs_the_roi_shape():
    with pytest.raises(ShapeError):
        extract_patches(as_buffer(np.zeros((76, 35))))


def test_patchset_needs_three_patches():
    with pytest.raises(ShapeError):
        PatchSet(patches=(as_buffer(np.zeros((35, 35))),) * 2)
    with pytest.raises(ShapeError):
        PatchSet(patches=(as_buffer(np.zeros((35, 34))),) * 3)


def test_augment_without_rotation_or_jitter(rng: np.random.Generator):
    patch_set = extract_patches(as_buffer(rng.uniform(0, 255, size=(77, 35))))
    out = augment_patchset(patch_set, rng, max_degrees=0.0, lo=1.0, hi=1.0)
    for a, b in zip(out.patches, patch_set.patches, strict=True):
        assert np.array_equal(a, b)


def test_augment_is_random(rng: np.random.Generator):
    patch_set = extract_patches(as_buffer(rng.uniform(0, 255, size=(77, 35))))
    first = augment_patchset(patch_set, np.random.default_rng(1))
    second = augment_patchset(patch_set, np.random.default_rng(2))
    assert not np.array_equal(stack_patches(first), stack_patches(second))
    again = augment_patchset(patch_set, np.random.default_rng(1))
    assert np.array_equal(stack_patches(first), stack_patches(again))
    assert 0.0 <= stack_patches(first).min()
    assert stack_patches(first).max() <= 255.0


def test_rotation_angles_are_centered(monkeypatch: pytest.MonkeyPatch):
    angles: list[float] = []

    def record_angle(patch: np.ndarray, angle: float) -> np.ndarray:
        angles.append(angle)
        return patch

    monkeypatch.setattr(patches_module, "rotate_patch", record_angle)
    patch_set = constant_patchset(10.0, 20.0, 30.0)
    rng = np.random.default_rng(8)
    while len(angles) < 10_000:
        augment_patchset(patch_set, rng)

    assert max(abs(angle) for angle in angles) <= 5.0
    assert abs(float(np.mean(angles))) < 0.2


def test_stack_and_unstack(rng: np.random.Generator):
    stacked = stack_patches(constant_patchset(10.0, 20.0, 30.0))
    assert stacked.shape == (35, 35, 3)
    assert stacked.mean(axis=(0, 1)).tolist() == [10.0, 20.0, 30.0]
    assert not stack_patches(constant_patchset(0.0, 0.0, 0.0)).any()

    patch_set = extract_patches(as_buffer(rng.uniform(0, 255, size=(77, 35))))
    restored = unstack_patches(stack_patches(patch_set))
    for a, b in zip(restored.patches, patch_set.patches, strict=True):
        assert np.array_equal(a, b)
    with pytest.raises(ShapeError):
        unstack_patches(as_buffer(np.zeros((35, 35))))


def test_patchset_to_array():
    array = patchset_to_array(constant_patchset(0.0, 51.0, 255.0))
    assert array.shape == (3, 35, 35)
    assert array.dtype == np.float32
    assert array[:, 0, 0].tolist() == pytest.approx([0.0, 0.2, 1.0])
    assert array.flags["C_CONTIGUOUS"]


def test_export_patches(tmp_path: Path, rng: np.random.Generator):
    img = as_buffer(rng.uniform(0, 255, size=(77, 35)).round())
    paths = export_patches(img, tmp_path, build_bank())
    assert [p.name for p in paths] == [
        "patch_0.png",
        "patch_0_filtered.png",
        "patch_1.png",
        "patch_1_filtered.png",
        "patch_2.png",
        "patch_2_filtered.png",
    ]
    assert np.array_equal(load_image(tmp_path / "patch_1.png"), img[21:56])
    assert load_image(tmp_path / "patch_0_filtered.png").shape == (35, 8 * 35, 1)
    assert len(export_patches(img, tmp_path / "plain")) == 3
