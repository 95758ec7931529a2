"""Tests for the image primitives."""

from pathlib import Path

import numpy as np
import pytest

from multipod.constants import Sex, Stage
from multipod.data_handling.packets.subject_record import Roi, SubjectRecord
from multipod.errors import ImageError, ShapeError
from multipod.pipeline.image_ops import (
    as_buffer,
    autocontrast,
    crop_roi,
    intensity_jitter,
    load_image,
    prepare_record,
    random_translate,
    resize,
    rotate_image,
    rotate_patch,
    save_image,
    translate,
)


class FixedDraws:
    """Stands in for a generator whose integer draws are known in advance."""

    def __init__(self, *values: int) -> None:
        self.values = list(values)

    def integers(self, _low: int, _high: int) -> int:
        return self.values.pop(0)


def gradient_image(height: int, width: int) -> np.ndarray:
    rows, cols = np.mgrid[0:height, 0:width]
    return as_buffer(rows * width + cols)


def disk_image(size: int = 35, radius: float = 12.0) -> np.ndarray:
    center = (size - 1) / 2
    rows, cols = np.mgrid[0:size, 0:size]
    return as_buffer(np.where(np.hypot(rows - center, cols - center) <= radius, 200.0, 20.0))


def test_as_buffer_shapes():
    assert as_buffer(np.zeros((4, 5))).shape == (4, 5, 1)
    assert as_buffer(np.zeros((4, 5, 3))).dtype == np.float32
    with pytest.raises(ShapeError):
        as_buffer(np.zeros(4))


def test_png_round_trip(tmp_path: Path):
    img = as_buffer(np.arange(77 * 35).reshape(77, 35) % 256)
    path = save_image(img, tmp_path / "sub" / "img.png")
    assert np.array_equal(load_image(path), img)


def test_unreadable_image_names_the_path(tmp_path: Path):
    path = tmp_path / "broken.png"
    path.write_bytes(b"not a png")
    with pytest.raises(ImageError) as info:
        load_image(path)
    assert info.value.path == path


def test_crop_full_image_is_identity():
    img = gradient_image(20, 12)
    assert np.array_equal(crop_roi(img, Roi(0, 0, 12, 20)), img)


def test_crop_top_left_block():
    img = gradient_image(20, 12)
    assert np.array_equal(crop_roi(img, Roi(0, 0, 10, 10)), img[:10, :10])


def test_crop_outside_the_image():
    with pytest.raises(ShapeError):
        crop_roi(gradient_image(20, 12), Roi(3, 0, 10, 10))


def test_resize_preserves_constants():
    out = resize(as_buffer(np.full((120, 61), 128.0)))
    assert out.shape == (77, 35, 1)
    assert np.allclose(out, 128.0)


def test_resize_same_size_is_identity():
    img = gradient_image(77, 35)
    assert np.array_equal(resize(img), img)


def test_resize_halves_a_ramp():
    ramp = as_buffer(np.tile(np.arange(70, dtype=np.float64), (154, 1)))
    out = resize(ramp)
    # Output column j samples input column 2j + 0.5
    expected = 2.0 * np.arange(35) + 0.5
    assert np.abs(out[:, :, 0] - expected).max() < 1.0


def test_prepare_record(tmp_path: Path):
    big = save_image(as_buffer(np.full((154, 70), 90.0)), tmp_path / "big.png")
    small = save_image(gradient_image(77, 35) % 256, tmp_path / "small.png")

    with_roi = SubjectRecord(str(big), Sex.FEMALE, 10.0, Stage.CS1, Roi(4, 8, 62, 138))
    assert np.allclose(prepare_record(with_roi), 90.0)
    assert prepare_record(SubjectRecord(str(small), Sex.MALE, 10.0, Stage.CS1)).shape == (
        77,
        35,
        1,
    )

    with pytest.raises(ImageError, match="roi"):
        prepare_record(SubjectRecord(str(big), Sex.MALE, 10.0, Stage.CS1))
    with pytest.raises(ImageError):
        prepare_record(
            SubjectRecord(str(big), Sex.MALE, 10.0, Stage.CS1, Roi(40, 8, 62, 138))
        )


def test_autocontrast_stretch():
    img = as_buffer(np.linspace(50.0, 150.0, 77 * 35).reshape(77, 35))
    out = autocontrast(img)
    assert out.min() == 0.0
    assert out.max() == pytest.approx(255.0)
    middle = (img[30, 10, 0] - 50.0) / 100.0 * 255.0
    assert out[30, 10, 0] == pytest.approx(middle, abs=1e-3)


def test_autocontrast_two_values_and_constants():
    two = as_buffer(np.where(np.arange(35 * 35).reshape(35, 35) % 2, 20.0, 10.0))
    assert set(np.unique(autocontrast(two)).tolist()) == {0.0, 255.0}
    constant = as_buffer(np.full((5, 5), 77.0))
    assert np.array_equal(autocontrast(constant), constant)


def test_autocontrast_is_idempotent(rng: np.random.Generator):
    img = as_buffer(rng.uniform(30.0, 200.0, size=(77, 35)))
    once = autocontrast(img)
    assert np.allclose(autocontrast(once), once, atol=1e-3)


def test_translate_zero_is_identity(rng: np.random.Generator):
    img = gradient_image(77, 35)
    assert np.array_equal(random_translate(img, rng, 0, 0), img)


def test_translate_known_shift():
    img = gradient_image(77, 35) + 1.0
    out = random_translate(img, FixedDraws(2, 0), 3, 3)
    assert np.array_equal(out[:, 2:], img[:, :-2])
    assert not out[:, :2].any()


@pytest.mark.parametrize(("dx", "dy"), [(1, 0), (-3, 2), (0, -1), (35, 0)])
def test_translate_never_brightens(dx: int, dy: int):
    img = gradient_image(77, 35)
    out = translate(img, dx, dy)
    assert out.shape == img.shape
    assert out.mean() <= img.mean()


def test_rotate_zero_is_identity():
    img = gradient_image(35, 35)
    assert np.array_equal(rotate_image(img, 0.0), img)


def test_rotate_disk_interior():
    disk = disk_image()
    out = rotate_image(disk, 5.0)
    center = 17.0
    rows, cols = np.mgrid[0:35, 0:35]
    interior = np.hypot(rows - center, cols - center) <= 9.0
    assert np.abs(out[:, :, 0] - disk[:, :, 0])[interior].max() < 1e-3


def test_rotate_back_and_forth():
    rows, cols = np.mgrid[0:35, 0:35]
    blob = as_buffer(20.0 + 200.0 * np.exp(-((rows - 17.0) ** 2 + (cols - 15.0) ** 2) / 50.0))
    back = rotate_image(rotate_image(blob, 5.0), -5.0)
    inner = np.s_[8:-8, 8:-8]
    assert np.abs(back[inner] - blob[inner]).max() < 10.0


def test_rotate_patch_limits():
    patch = disk_image()
    assert rotate_patch(patch, 4.0).shape == (35, 35, 1)
    with pytest.raises(ValueError, match="15"):
        rotate_patch(patch, 20.0)
    with pytest.raises(ShapeError):
        rotate_patch(gradient_image(77, 35), 1.0)


def test_jitter(rng: np.random.Generator):
    img = as_buffer(np.full((35, 35), 100.0))
    assert np.array_equal(intensity_jitter(img, rng, 1.0, 1.0), img)
    assert np.allclose(intensity_jitter(img, rng, 1.2, 1.2), 120.0)
    bright = as_buffer(np.full((35, 35), 250.0))
    assert np.array_equal(intensity_jitter(bright, rng, 1.2, 1.2), np.full_like(bright, 255.0))
    drawn = intensity_jitter(img, rng, 0.8, 1.2)
    assert 80.0 <= float(drawn[0, 0, 0]) <= 120.0
    assert np.unique(drawn).size == 1
    with pytest.raises(ValueError, match="jitter"):
        intensity_jitter(img, rng, 1.2, 0.8)
