"""Module for generating stylized cervical spine images with known maturation stages.

Every image shows three vertebral bodies (C2, C3, C4) stacked vertically, one inside each patch
window. With increasing stage the bodies grow taller relative to their width and the lower
borders become more concave, which is how the stages differ on real radiographs.
"""

import warnings
from pathlib import Path

import msgspec
import numpy as np
import numpy.typing as npt

from multipod.constants import (
    DEFAULT_AGE_MODEL,
    DEFAULT_NOISE_LEVEL,
    IMAGES_DIR_NAME,
    MANIFEST_FILE_NAME,
    MAX_AGE_YEARS,
    MIN_AGE_YEARS,
    NUM_PATCHES,
    NUM_STAGES,
    PATCH_SIZE,
    ROI_HEIGHT,
    ROI_WIDTH,
    SEED_MASK,
    STAGES,
    SYNTHETIC_BACKGROUND,
    SYNTHETIC_BONE,
    SYNTHETIC_IMAGE_SIZE,
    SYNTHETIC_ROI,
    SYNTHETIC_ROI_IMAGE_SIZE,
    SYNTHETIC_SUPERSAMPLING,
    Sex,
)
from multipod.data_handling.manifest import save_manifest
from multipod.data_handling.packets.subject_record import Manifest, Roi, SubjectRecord
from multipod.errors import ConfigError
from multipod.pipeline.image_ops import ImageBuffer, as_buffer, save_image
from multipod.pipeline.patches import patch_offsets

# Geometry is written in pixels of a ROI_HEIGHT x ROI_WIDTH region of interest.
BODY_WIDTH_PX = (24.0, 18.0)
"""Body width at CS1 and at CS6."""
BODY_HEIGHT_PX = (11.0, 16.0)
"""Body height at CS1 and at CS6."""
CONCAVITY_PX = (0.5, 4.0)
"""Depth of the C2 lower border concavity at CS1 and at CS6."""
CONCAVITY_FACTORS = (1.0, 0.85, 0.7)
"""C3 and C4 lower borders are less concave than C2."""
MAX_POSITION_JITTER_PX = 1
"""Whole-pixel jitter of the spine position, per axis."""


class SyntheticConfig(msgspec.Struct, frozen=True):
    """
    Describes a synthetic dataset.
    """

    per_stage_count: int
    """Images per stage. The dataset holds 6 x per_stage_count images."""
    image_size: tuple[int, int] = SYNTHETIC_IMAGE_SIZE
    """(height, width) of the emitted images."""
    noise_level: float = DEFAULT_NOISE_LEVEL
    """Standard deviation of the additive Gaussian noise, in intensity units."""
    seed: int = 0
    age_model: tuple[float, float, float] = DEFAULT_AGE_MODEL
    """(base_years, per_stage_years, jitter_years): age = base + per_stage * stage_index +
    uniform(0, jitter)."""
    with_roi: bool = False
    """Emit a larger radiograph with the spine inside a stored roi instead of a cropped one."""

    def __post_init__(self) -> None:
        if self.per_stage_count < 1:
            raise ConfigError(f"per_stage_count must be at least 1, got {self.per_stage_count}")
        if min(self.image_size) < PATCH_SIZE:
            raise ConfigError(f"image_size {self.image_size} is smaller than a {PATCH_SIZE} patch")
        if self.noise_level < 0:
            raise ConfigError(f"noise_level must be non-negative, got {self.noise_level}")
        if self.age_model[2] < 0:
            raise ConfigError("age jitter must be non-negative")

    @classmethod
    def with_stored_roi(cls, per_stage_count: int, **kwargs: object) -> "SyntheticConfig":
        """A configuration for the second mode: SYNTHETIC_ROI_IMAGE_SIZE images with a roi."""
        return cls(
            per_stage_count=per_stage_count,
            image_size=SYNTHETIC_ROI_IMAGE_SIZE,
            with_roi=True,
            **kwargs,
        )


class StageGeometry(msgspec.Struct, frozen=True):
    """
    The shape parameters of the vertebral bodies of one stage, in region-of-interest pixels.
    """

    body_width: float
    body_height: float
    concavity: float
    """Depth of the C2 lower border concavity."""

    @property
    def aspect_ratio(self) -> float:
        """Height over width of a body."""
        return self.body_height / self.body_width


def stage_geometry(stage_index: int) -> StageGeometry:
    """
    Interpolates the body shape linearly between CS1 and CS6. Both the aspect ratio and the
    concavity depth increase strictly with the stage index.
    """
    if not 0 <= stage_index < NUM_STAGES:
        raise ValueError(f"stage index must be in [0, {NUM_STAGES}), got {stage_index}")
    t = stage_index / (NUM_STAGES - 1)

    def lerp(pair: tuple[float, float]) -> float:
        return pair[0] + (pair[1] - pair[0]) * t

    return StageGeometry(
        body_width=lerp(BODY_WIDTH_PX),
        body_height=lerp(BODY_HEIGHT_PX),
        concavity=lerp(CONCAVITY_PX),
    )


def render_spine(
    geometry: StageGeometry, out_h: int, out_w: int, dx: float = 0.0, dy: float = 0.0
) -> npt.NDArray[np.float64]:
    """
    Draws the three vertebral bodies into an out_h x out_w image without noise. The drawing is
    laid out for a ROI_HEIGHT x ROI_WIDTH frame and stretched to the requested size.
    :param dx: Horizontal offset of the spine, in region-of-interest pixels.
    :param dy: Vertical offset of the spine, in region-of-interest pixels.
    :return: Intensities in [SYNTHETIC_BACKGROUND, SYNTHETIC_BONE].
    """
    ss = SYNTHETIC_SUPERSAMPLING
    # Sub-sample centers, mapped into the region-of-interest frame
    ys = (np.arange(out_h * ss) + 0.5) / ss * (ROI_HEIGHT / out_h)
    xs = (np.arange(out_w * ss) + 0.5) / ss * (ROI_WIDTH / out_w)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")

    inside = np.zeros(grid_y.shape, dtype=bool)
    half_width = geometry.body_width / 2
    center_x = ROI_WIDTH / 2 + dx
    for offset, factor in zip(
        patch_offsets(ROI_HEIGHT, PATCH_SIZE, NUM_PATCHES), CONCAVITY_FACTORS, strict=True
    ):
        center_y = offset + PATCH_SIZE / 2 + dy
        top = center_y - geometry.body_height / 2
        bottom = center_y + geometry.body_height / 2
        u = (grid_x - center_x) / half_width
        # The lower border rises by the concavity depth at the middle of the body
        lower_border = bottom - geometry.concavity * factor * (1.0 - u**2)
        inside |= (np.abs(u) <= 1.0) & (grid_y >= top) & (grid_y <= lower_border)

    coverage = inside.reshape(out_h, ss, out_w, ss).mean(axis=(1, 3))
    return SYNTHETIC_BACKGROUND + (SYNTHETIC_BONE - SYNTHETIC_BACKGROUND) * coverage


def synthesize_image(
    cfg: SyntheticConfig, stage_index: int, rng: np.random.Generator
) -> ImageBuffer:
    """
    Draws one noisy image of the given stage.
    """
    geometry = stage_geometry(stage_index)
    dx, dy = rng.integers(-MAX_POSITION_JITTER_PX, MAX_POSITION_JITTER_PX + 1, size=2)
    height, width = cfg.image_size
    if cfg.with_roi:
        roi = synthetic_roi(cfg.image_size)
        canvas = np.full((height, width), SYNTHETIC_BACKGROUND, dtype=np.float64)
        # A bright structure outside the roi (the mandible side), so a wrong crop is visible
        canvas[:, roi.x + roi.width + 1 :] = SYNTHETIC_BONE
        canvas[roi.y : roi.y + roi.height, roi.x : roi.x + roi.width] = render_spine(
            geometry, roi.height, roi.width, float(dx), float(dy)
        )
    else:
        canvas = render_spine(geometry, height, width, float(dx), float(dy))
    if cfg.noise_level > 0:
        canvas = canvas + rng.normal(0.0, cfg.noise_level, size=canvas.shape)
    return as_buffer(np.clip(canvas, 0.0, 255.0))


def synthetic_roi(image_size: tuple[int, int]) -> Roi:
    """
    The roi of a with_roi image: SYNTHETIC_ROI scaled from SYNTHETIC_ROI_IMAGE_SIZE to image_size.
    """
    scale_y = image_size[0] / SYNTHETIC_ROI_IMAGE_SIZE[0]
    scale_x = image_size[1] / SYNTHETIC_ROI_IMAGE_SIZE[1]
    x, y, width, height = SYNTHETIC_ROI
    return Roi(
        x=round(x * scale_x),
        y=round(y * scale_y),
        width=round(width * scale_x),
        height=round(height * scale_y),
    )


def synthetic_age(cfg: SyntheticConfig, stage_index: int, rng: np.random.Generator) -> float:
    """
    base + per_stage * stage_index + uniform(0, jitter), rounded to hundredths of a year.
    """
    base, per_stage, jitter = cfg.age_model
    return round(base + per_stage * stage_index + float(rng.uniform(0.0, jitter)), 2)


def generate_synthetic(cfg: SyntheticConfig, out_dir: Path) -> tuple[Manifest, Path]:
    """
    Writes a labeled synthetic dataset: PNG images under out_dir/images and a manifest CSV.
    Records are ordered stage by stage and sexes alternate F, M, F, ... over that order. Every
    image has its own generator seeded by (seed, stage, index), so the output is identical for an
    identical configuration.
    :param cfg: What to generate.
    :param out_dir: Destination directory, created if needed.
    :return: (the manifest, the path of the manifest file)
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / IMAGES_DIR_NAME
    images_dir.mkdir(parents=True, exist_ok=True)
    images_dir = images_dir.resolve()

    roi = synthetic_roi(cfg.image_size) if cfg.with_roi else None
    seed = cfg.seed & SEED_MASK
    records = []
    for stage_index, stage in enumerate(STAGES):
        for i in range(cfg.per_stage_count):
            rng = np.random.default_rng([seed, stage_index, i])
            image = synthesize_image(cfg, stage_index, rng)
            age = synthetic_age(cfg, stage_index, rng)
            image_path = save_image(image, images_dir / f"{stage.value.lower()}_{i:04d}.png")
            records.append(
                SubjectRecord(
                    image_path=str(image_path),
                    sex=Sex.FEMALE if len(records) % 2 == 0 else Sex.MALE,
                    age_years=age,
                    stage=stage,
                    roi=roi,
                )
            )

    ages = [record.age_years for record in records]
    if min(ages) < MIN_AGE_YEARS or max(ages) > MAX_AGE_YEARS:
        warnings.warn(
            f"synthetic ages span [{min(ages):g}, {max(ages):g}] years, outside the "
            f"[{MIN_AGE_YEARS:g}, {MAX_AGE_YEARS:g}] range of the radiograph collection",
            stacklevel=2,
        )

    manifest = Manifest(records=tuple(records), source_tag=f"synthetic(seed={cfg.seed})")
    manifest_path = save_manifest(manifest, out_dir / MANIFEST_FILE_NAME)
    return manifest, manifest_path
