"""Module for the whole-image data augmentation policies applied to training regions of interest."""

from collections.abc import Callable

import msgspec
import numpy as np

from multipod.constants import (
    AUGMIX_ALPHA,
    AUGMIX_MAX_DEPTH,
    AUGMIX_WIDTH,
    DEFAULT_MAGNITUDE,
    DEFAULT_MAX_TRANSLATE_PX,
    MAX_INTENSITY,
    MAX_MAGNITUDE,
    MAX_OP_JITTER,
    MAX_OP_ROTATION_DEGREES,
    MAX_OP_TRANSLATE_PX,
    RANDAUGMENT_NUM_OPS,
    ROI_HEIGHT,
    ROI_WIDTH,
    PolicyKind,
)
from multipod.errors import ConfigError, ShapeError
from multipod.interfaces.base_policy import BasePolicy
from multipod.pipeline.image_ops import (
    ImageBuffer,
    autocontrast,
    random_translate,
    rotate_image,
    scale_intensity,
    translate,
)


class AugPolicy(msgspec.Struct, frozen=True):
    """
    Describes a whole-image augmentation policy and its magnitudes. Only the fields of the chosen
    kind are used.
    """

    kind: PolicyKind = PolicyKind.TRANSLATE_AUTOCONTRAST
    max_dx: int = DEFAULT_MAX_TRANSLATE_PX
    """Random translation limit along columns, in pixels (translate-ac)."""
    max_dy: int = DEFAULT_MAX_TRANSLATE_PX
    """Random translation limit along rows, in pixels (translate-ac)."""
    magnitude: float = DEFAULT_MAGNITUDE
    """Strength of every operation, on a 0-10 scale (randaug, augmix)."""
    num_ops: int = RANDAUGMENT_NUM_OPS
    """Operations per image (randaug)."""
    width: int = AUGMIX_WIDTH
    """Chains mixed together (augmix)."""
    max_depth: int = AUGMIX_MAX_DEPTH
    """Longest chain (augmix)."""
    alpha: float = AUGMIX_ALPHA
    """Dirichlet and Beta concentration of the mixing weights (augmix)."""

    def __post_init__(self) -> None:
        if self.max_dx < 0 or self.max_dy < 0:
            raise ConfigError("translation limits must be non-negative")
        if not 0.0 <= self.magnitude <= MAX_MAGNITUDE:
            raise ConfigError(f"magnitude must be in [0, {MAX_MAGNITUDE:g}], got {self.magnitude}")
        if self.num_ops < 1 or self.width < 1 or self.max_depth < 1:
            raise ConfigError("num_ops, width and max_depth must be at least 1")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")


# ------------------------- Grayscale-safe operations at a level in [0, 1] -------------------------


def _random_sign(rng: np.random.Generator) -> int:
    return 1 if rng.random() < 0.5 else -1


def _op_translate(img: ImageBuffer, rng: np.random.Generator, level: float) -> ImageBuffer:
    shift = round(level * MAX_OP_TRANSLATE_PX)
    return translate(img, _random_sign(rng) * shift, _random_sign(rng) * shift)


def _op_rotate(img: ImageBuffer, rng: np.random.Generator, level: float) -> ImageBuffer:
    return rotate_image(img, _random_sign(rng) * level * MAX_OP_ROTATION_DEGREES)


def _op_autocontrast(img: ImageBuffer, _rng: np.random.Generator, _level: float) -> ImageBuffer:
    return autocontrast(img)


def _op_jitter(img: ImageBuffer, rng: np.random.Generator, level: float) -> ImageBuffer:
    return scale_intensity(img, 1.0 + _random_sign(rng) * level * MAX_OP_JITTER)


OPERATIONS: tuple[Callable[[ImageBuffer, np.random.Generator, float], ImageBuffer], ...] = (
    _op_translate,
    _op_rotate,
    _op_autocontrast,
    _op_jitter,
)
"""The operation pool of the RandAugment-style and AugMix-style policies. No color operations,
the radiographs are grayscale."""


# ------------------------------------------ Policies -------------------------------------------


class NoAugmentation(BasePolicy):
    """
    Passes the image through unchanged.
    """

    __slots__ = ()

    def apply(self, img: ImageBuffer, _rng: np.random.Generator) -> ImageBuffer:
        return img.copy()


class TranslateAutoContrast(BasePolicy):
    """
    Random whole-pixel translation followed by AutoContrast.
    """

    __slots__ = ("max_dx", "max_dy")

    def __init__(self, max_dx: int, max_dy: int) -> None:
        self.max_dx = max_dx
        self.max_dy = max_dy

    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        return autocontrast(random_translate(img, rng, self.max_dx, self.max_dy))


class RandAugmentLite(BasePolicy):
    """
    Applies `num_ops` operations drawn with replacement from the operation pool, all at the same
    magnitude. The direction of each operation (shift sign, rotation sense, brighter or darker)
    is random.
    """

    __slots__ = ("level", "num_ops")

    def __init__(self, num_ops: int, magnitude: float) -> None:
        self.num_ops = num_ops
        self.level = magnitude / MAX_MAGNITUDE

    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        out = img
        for op_index in rng.integers(0, len(OPERATIONS), size=self.num_ops):
            out = OPERATIONS[op_index](out, rng, self.level)
        return out.copy() if out is img else out


class AugMixLite(BasePolicy):
    """
    Mixes `width` chains of one to `max_depth` random operations. The chains are combined with
    Dirichlet weights and the result is blended with the original image by a Beta-distributed
    factor, so the output is a convex combination of images in [0, 255].
    """

    __slots__ = ("alpha", "level", "max_depth", "width")

    def __init__(self, width: int, max_depth: int, magnitude: float, alpha: float) -> None:
        self.width = width
        self.max_depth = max_depth
        self.level = magnitude / MAX_MAGNITUDE
        self.alpha = alpha

    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        weights = rng.dirichlet([self.alpha] * self.width)
        blend = float(rng.beta(self.alpha, self.alpha))
        mixed = np.zeros(img.shape, dtype=np.float64)
        for weight in weights:
            chain = img
            depth = int(rng.integers(1, self.max_depth + 1))
            for _ in range(depth):
                op = OPERATIONS[int(rng.integers(0, len(OPERATIONS)))]
                chain = op(chain, rng, float(rng.uniform(0.0, self.level)))
            mixed += weight * chain
        out = blend * img + (1.0 - blend) * mixed
        return np.clip(out, 0.0, MAX_INTENSITY).astype(np.float32)


def make_policy(policy: AugPolicy) -> BasePolicy:
    """
    Builds the policy object an AugPolicy describes.
    """
    match policy.kind:
        case PolicyKind.NONE:
            return NoAugmentation()
        case PolicyKind.TRANSLATE_AUTOCONTRAST:
            return TranslateAutoContrast(policy.max_dx, policy.max_dy)
        case PolicyKind.RANDAUGMENT:
            return RandAugmentLite(policy.num_ops, policy.magnitude)
        case PolicyKind.AUGMIX:
            return AugMixLite(policy.width, policy.max_depth, policy.magnitude, policy.alpha)
    raise ConfigError(f"unknown augmentation policy '{policy.kind}'")


def apply_policy(policy: AugPolicy, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
    """
    Augments a region of interest with the given policy.
    :param policy: Which policy, and its magnitudes.
    :param img: A ROI_HEIGHT x ROI_WIDTH region of interest.
    :param rng: The generator every random draw is taken from.
    """
    if img.shape[:2] != (ROI_HEIGHT, ROI_WIDTH):
        raise ShapeError(f"policies apply to {ROI_HEIGHT}x{ROI_WIDTH} images, got {img.shape}")
    return make_policy(policy).apply(img, rng)
