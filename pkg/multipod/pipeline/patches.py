"""Module for cutting the region of interest into overlapping vertebra patches."""

from pathlib import Path

import msgspec
import numpy as np
import numpy.typing as npt

from multipod.constants import (
    JITTER_HIGH,
    JITTER_LOW,
    MAX_INTENSITY,
    NUM_PATCHES,
    PATCH_ROTATION_DEGREES,
    PATCH_SIZE,
    ROI_HEIGHT,
    ROI_WIDTH,
)
from multipod.errors import ShapeError
from multipod.model.filters import DirectionalFilterBank, apply_bank, normalize_tile
from multipod.pipeline.image_ops import ImageBuffer, intensity_jitter, rotate_patch, save_image


class PatchSet(msgspec.Struct, frozen=True):
    """
    The three PATCH_SIZE x PATCH_SIZE single channel patches of one image, top to bottom: the C2,
    C3 and C4 vertebrae.
    """

    patches: tuple[ImageBuffer, ...]

    def __post_init__(self) -> None:
        if len(self.patches) != NUM_PATCHES:
            raise ShapeError(f"a patch set holds {NUM_PATCHES} patches, got {len(self.patches)}")
        for patch in self.patches:
            if patch.shape != (PATCH_SIZE, PATCH_SIZE, 1):
                raise ShapeError(
                    f"patches must be {PATCH_SIZE}x{PATCH_SIZE}x1, got {patch.shape}"
                )


def patch_offsets(
    image_h: int = ROI_HEIGHT, patch: int = PATCH_SIZE, n: int = NUM_PATCHES
) -> list[int]:
    """
    Top rows of n equally spaced windows of height `patch` that span an image of height
    `image_h`. The first window starts at row 0 and the last one ends on the last row.
    """
    if n < 2:
        raise ValueError(f"at least 2 windows are needed, got {n}")
    if patch > image_h:
        raise ValueError(f"a {patch} row window does not fit in {image_h} rows")
    return [round(k * (image_h - patch) / (n - 1)) for k in range(n)]


def extract_patches(img: ImageBuffer) -> PatchSet:
    """
    Cuts a ROI_HEIGHT x ROI_WIDTH x 1 region of interest into three full width, overlapping
    windows. Pixels are copied, never resampled.
    """
    if img.shape != (ROI_HEIGHT, ROI_WIDTH, 1):
        raise ShapeError(
            f"patches are cut from {ROI_HEIGHT}x{ROI_WIDTH}x1 images, got {img.shape}"
        )
    return PatchSet(
        patches=tuple(
            img[top : top + PATCH_SIZE].copy() for top in patch_offsets(ROI_HEIGHT, PATCH_SIZE)
        )
    )


def augment_patchset(
    patch_set: PatchSet,
    rng: np.random.Generator,
    max_degrees: float = PATCH_ROTATION_DEGREES,
    lo: float = JITTER_LOW,
    hi: float = JITTER_HIGH,
) -> PatchSet:
    """
    Patch augmentation, for training samples only. Every patch independently gets a rotation
    drawn uniformly from [-max_degrees, max_degrees] and then a grayscale jitter factor drawn
    from [lo, hi].
    """
    augmented = []
    for patch in patch_set.patches:
        angle = float(rng.uniform(-max_degrees, max_degrees)) if max_degrees > 0 else 0.0
        rotated = rotate_patch(patch, angle)
        augmented.append(intensity_jitter(rotated, rng, lo, hi))
    return PatchSet(patches=tuple(augmented))


def stack_patches(patch_set: PatchSet) -> ImageBuffer:
    """
    Stacks the patches as the channels of one PATCH_SIZE x PATCH_SIZE x 3 buffer, channel k
    holding patch k.
    """
    return np.concatenate(patch_set.patches, axis=2)


def unstack_patches(stacked: ImageBuffer) -> PatchSet:
    """
    Inverse of stack_patches.
    """
    if stacked.shape != (PATCH_SIZE, PATCH_SIZE, NUM_PATCHES):
        raise ShapeError(
            f"expected a {PATCH_SIZE}x{PATCH_SIZE}x{NUM_PATCHES} stack, got {stacked.shape}"
        )
    return PatchSet(patches=tuple(stacked[:, :, [k]].copy() for k in range(NUM_PATCHES)))


def patchset_to_array(patch_set: PatchSet) -> npt.NDArray[np.float32]:
    """
    Converts a patch set to the (3, PATCH_SIZE, PATCH_SIZE) layout the network reads, with
    intensities scaled to [0, 1].
    """
    return np.ascontiguousarray(
        stack_patches(patch_set).transpose(2, 0, 1) / np.float32(MAX_INTENSITY), dtype=np.float32
    )


def export_patches(
    img: ImageBuffer, out_dir: Path, bank: DirectionalFilterBank | None = None
) -> list[Path]:
    """
    Writes the patches of a region of interest as patch_{k}.png and, with a filter bank, the
    eight responses of every patch side by side as patch_{k}_filtered.png.
    :return: The paths written.
    """
    out_dir = Path(out_dir)
    paths = []
    for k, patch in enumerate(extract_patches(img).patches):
        paths.append(save_image(patch, out_dir / f"patch_{k}.png"))
        if bank is not None:
            responses = apply_bank(patch, bank)
            tiles = [normalize_tile(responses[:, :, j]) for j in range(responses.shape[2])]
            montage = np.concatenate(tiles, axis=1)
            paths.append(save_image(montage, out_dir / f"patch_{k}_filtered.png"))
    return paths
