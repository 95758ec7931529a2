"""Tests for the whole-image augmentation policies."""

import numpy as np
import pytest

from multipod.constants import PolicyKind
from multipod.errors import ConfigError, ShapeError
from multipod.pipeline.augmentation import (
    AugMixLite,
    AugPolicy,
    NoAugmentation,
    RandAugmentLite,
    TranslateAutoContrast,
    apply_policy,
    make_policy,
)
from multipod.pipeline.image_ops import as_buffer


@pytest.fixture
def roi(rng: np.random.Generator) -> np.ndarray:
    img = rng.uniform(20.0, 230.0, size=(77, 35))
    img[0, 0], img[-1, -1] = 0.0, 255.0
    return as_buffer(img)


def test_make_policy_kinds():
    assert isinstance(make_policy(AugPolicy(kind=PolicyKind.NONE)), NoAugmentation)
    assert isinstance(make_policy(AugPolicy()), TranslateAutoContrast)
    assert isinstance(make_policy(AugPolicy(kind=PolicyKind.RANDAUGMENT)), RandAugmentLite)
    assert isinstance(make_policy(AugPolicy(kind=PolicyKind.AUGMIX)), AugMixLite)
    assert make_policy(AugPolicy(kind=PolicyKind.AUGMIX)).name == "AugMixLite"


def test_none_policy_is_bit_identical(roi: np.ndarray, rng: np.random.Generator):
    out = apply_policy(AugPolicy(kind=PolicyKind.NONE), roi, rng)
    assert np.array_equal(out, roi)
    assert out is not roi


def test_translate_autocontrast_without_shift(roi: np.ndarray, rng: np.random.Generator):
    out = apply_policy(AugPolicy(max_dx=0, max_dy=0), roi, rng)
    assert np.allclose(out, roi, atol=1e-3)


def test_translate_autocontrast_stretches(roi: np.ndarray, rng: np.random.Generator):
    out = apply_policy(AugPolicy(), roi * 0.5 + 40.0, rng)
    assert out.min() == 0.0
    assert out.max() == pytest.approx(255.0)


@pytest.mark.parametrize("kind", list(PolicyKind))
def test_policies_keep_shape_and_range(kind: PolicyKind, roi: np.ndarray):
    policy = AugPolicy(kind=kind, magnitude=10.0)
    for seed in range(20):
        out = apply_policy(policy, roi, np.random.default_rng(seed))
        assert out.shape == roi.shape
        assert out.dtype == np.float32
        assert 0.0 <= out.min()
        assert out.max() <= 255.0


def test_augmix_range_over_many_draws(roi: np.ndarray):
    policy = AugPolicy(kind=PolicyKind.AUGMIX, magnitude=10.0)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        out = apply_policy(policy, roi, rng)
        assert 0.0 <= out.min()
        assert out.max() <= 255.0


@pytest.mark.parametrize("kind", [PolicyKind.RANDAUGMENT, PolicyKind.AUGMIX])
def test_policies_are_seeded(kind: PolicyKind, roi: np.ndarray):
    policy = AugPolicy(kind=kind)
    first = apply_policy(policy, roi, np.random.default_rng(5))
    again = apply_policy(policy, roi, np.random.default_rng(5))
    assert np.array_equal(first, again)
    others = [apply_policy(policy, roi, np.random.default_rng(seed)) for seed in range(6, 12)]
    assert any(not np.array_equal(first, other) for other in others)


def test_policy_does_not_touch_its_input(roi: np.ndarray, rng: np.random.Generator):
    before = roi.copy()
    for kind in PolicyKind:
        apply_policy(AugPolicy(kind=kind), roi, rng)
    assert np.array_equal(roi, before)


def test_policy_needs_a_region_of_interest(rng: np.random.Generator):
    with pytest.raises(ShapeError):
        apply_policy(AugPolicy(), as_buffer(np.zeros((35, 35))), rng)


@pytest.mark.parametrize(
    "kwargs",
    [{"max_dx": -1}, {"magnitude": 11.0}, {"num_ops": 0}, {"width": 0}, {"alpha": 0.0}],
)
def test_bad_policy(kwargs: dict):
    with pytest.raises(ConfigError):
        AugPolicy(**kwargs)
