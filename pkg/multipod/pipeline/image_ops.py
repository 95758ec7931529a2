"""Image primitives on grayscale buffers: IO, cropping, resampling and photometric operations.

An image buffer is a float32 numpy array shaped (height, width, channels) holding intensities in
the canonical range [0, 255].
"""

from pathlib import Path
from typing import TypeAlias

import numpy as np
import numpy.typing as npt
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from multipod.constants import (
    MAX_INTENSITY,
    MAX_PATCH_ROTATION_DEGREES,
    PATCH_SIZE,
    ROI_HEIGHT,
    ROI_WIDTH,
)
from multipod.data_handling.packets.subject_record import Roi, SubjectRecord
from multipod.errors import ImageError, ShapeError

ImageBuffer: TypeAlias = npt.NDArray[np.float32]


def as_buffer(data: npt.ArrayLike) -> ImageBuffer:
    """
    Converts a 2D or 3D array into an image buffer. A 2D array becomes a single channel image.
    """
    array = np.asarray(data, dtype=np.float32)
    if array.ndim == 2:
        array = array[:, :, np.newaxis]
    if array.ndim != 3:
        raise ShapeError(f"an image must be 2D or 3D, got shape {array.shape}")
    return array


def load_image(path: Path | str) -> ImageBuffer:
    """
    Reads an image file as a single channel buffer.
    :param path: The image to read. Color images are converted to grayscale.
    """
    try:
        with Image.open(path) as image:
            gray = image.convert("L")
            return as_buffer(np.asarray(gray))
    except (OSError, UnidentifiedImageError) as e:
        raise ImageError(f"cannot decode image ({e})", path=path) from None


def save_image(img: ImageBuffer, path: Path) -> Path:
    """
    Writes a single channel buffer as an 8-bit grayscale PNG. Intensities are rounded and clamped.
    """
    if img.shape[2] != 1:
        raise ShapeError(f"only single channel images can be written, got shape {img.shape}")
    pixels = np.clip(np.rint(img[:, :, 0]), 0, MAX_INTENSITY).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path, format="PNG")
    return path


def crop_roi(img: ImageBuffer, roi: Roi) -> ImageBuffer:
    """
    Copies the pixels inside a rectangle.
    :param img: The source image.
    :param roi: The rectangle, which must lie completely inside the image.
    """
    height, width = img.shape[:2]
    if (
        roi.x < 0
        or roi.y < 0
        or roi.width <= 0
        or roi.height <= 0
        or roi.x + roi.width > width
        or roi.y + roi.height > height
    ):
        raise ShapeError(f"roi {roi} does not fit inside a {height}x{width} image")
    return img[roi.y : roi.y + roi.height, roi.x : roi.x + roi.width].copy()


def resize(img: ImageBuffer, out_h: int = ROI_HEIGHT, out_w: int = ROI_WIDTH) -> ImageBuffer:
    """
    Bilinear resampling with pixel-center alignment: output pixel i samples the input at
    (i + 0.5) * in / out - 0.5, clamped to the image. A same-size resize returns a copy.
    """
    height, width, channels = img.shape
    if height == 0 or width == 0:
        raise ShapeError(f"cannot resize an empty {height}x{width} image")
    if (height, width) == (out_h, out_w):
        return img.copy()

    rows = np.clip((np.arange(out_h) + 0.5) * (height / out_h) - 0.5, 0, height - 1)
    cols = np.clip((np.arange(out_w) + 0.5) * (width / out_w) - 0.5, 0, width - 1)
    grid_rows, grid_cols = np.meshgrid(rows, cols, indexing="ij")
    out = np.empty((out_h, out_w, channels), dtype=np.float32)
    for channel in range(channels):
        out[:, :, channel] = ndimage.map_coordinates(
            img[:, :, channel].astype(np.float64),
            [grid_rows, grid_cols],
            order=1,
            mode="nearest",
        )
    return out


def prepare_record(record: SubjectRecord) -> ImageBuffer:
    """
    Loads the image of a record and brings it to the ROI_HEIGHT x ROI_WIDTH region of interest:
    crop to the stored roi and resize. A record without a roi must already have that size.
    """
    img = load_image(record.image_path)
    if record.roi is not None:
        try:
            img = crop_roi(img, record.roi)
        except ShapeError as e:
            raise ImageError(str(e), path=record.image_path) from None
        return resize(img, ROI_HEIGHT, ROI_WIDTH)
    if img.shape[:2] != (ROI_HEIGHT, ROI_WIDTH):
        raise ImageError(
            f"image is {img.shape[0]}x{img.shape[1]} and the record has no roi; "
            f"only {ROI_HEIGHT}x{ROI_WIDTH} images may omit it",
            path=record.image_path,
        )
    return img


def autocontrast(img: ImageBuffer) -> ImageBuffer:
    """
    Stretches intensities linearly so the darkest pixel becomes 0 and the brightest 255. A
    constant image is returned unchanged.
    """
    low = float(img.min())
    high = float(img.max())
    if high <= low:
        return img.copy()
    return ((img - low) / (high - low) * MAX_INTENSITY).astype(np.float32)


def translate(img: ImageBuffer, dx: int, dy: int) -> ImageBuffer:
    """
    Shifts an image by whole pixels, dx to the right and dy down. Vacated pixels are zero.
    """
    height, width = img.shape[:2]
    out = np.zeros_like(img)
    if abs(dx) >= width or abs(dy) >= height:
        return out
    src_rows = slice(max(0, -dy), height - max(0, dy))
    dst_rows = slice(max(0, dy), height - max(0, -dy))
    src_cols = slice(max(0, -dx), width - max(0, dx))
    dst_cols = slice(max(0, dx), width - max(0, -dx))
    out[dst_rows, dst_cols] = img[src_rows, src_cols]
    return out


def random_translate(
    img: ImageBuffer, rng: np.random.Generator, max_dx: int, max_dy: int
) -> ImageBuffer:
    """
    Shifts an image by a whole-pixel offset drawn uniformly from
    [-max_dx, max_dx] x [-max_dy, max_dy]. The column offset is drawn before the row offset.
    """
    if max_dx < 0 or max_dy < 0:
        raise ValueError(f"translation limits must be non-negative, got ({max_dx}, {max_dy})")
    dx = int(rng.integers(-max_dx, max_dx + 1))
    dy = int(rng.integers(-max_dy, max_dy + 1))
    return translate(img, dx, dy)


def rotate_image(img: ImageBuffer, angle: float) -> ImageBuffer:
    """
    Rotates an image about its center by `angle` degrees with bilinear resampling. Pixels that
    come from outside the image are zero.
    """
    if angle == 0:
        return img.copy()
    out = ndimage.rotate(
        img.astype(np.float64),
        angle,
        axes=(1, 0),
        reshape=False,
        order=1,
        mode="constant",
        cval=0.0,
    )
    return np.clip(out, 0.0, MAX_INTENSITY).astype(np.float32)


def rotate_patch(patch: ImageBuffer, angle: float) -> ImageBuffer:
    """
    Rotates a PATCH_SIZE x PATCH_SIZE patch. Patch augmentation only ever rotates by a few degrees.
    """
    if patch.shape[:2] != (PATCH_SIZE, PATCH_SIZE):
        raise ShapeError(f"a patch must be {PATCH_SIZE}x{PATCH_SIZE}, got {patch.shape}")
    if abs(angle) > MAX_PATCH_ROTATION_DEGREES:
        raise ValueError(
            f"patch rotation must stay within +/-{MAX_PATCH_ROTATION_DEGREES:g} degrees, "
            f"got {angle}"
        )
    return rotate_image(patch, angle)


def scale_intensity(img: ImageBuffer, factor: float) -> ImageBuffer:
    """
    Multiplies every intensity by `factor` and clamps to [0, 255].
    """
    return np.clip(img * np.float32(factor), 0.0, MAX_INTENSITY).astype(np.float32)


def intensity_jitter(
    img: ImageBuffer, rng: np.random.Generator, lo: float, hi: float
) -> ImageBuffer:
    """
    Grayscale jittering: the whole image becomes brighter or darker by one factor drawn uniformly
    from [lo, hi].
    """
    if lo <= 0 or lo > hi:
        raise ValueError(f"jitter range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
    if lo == hi:
        return scale_intensity(img, lo)
    return scale_intensity(img, float(rng.uniform(lo, hi)))
