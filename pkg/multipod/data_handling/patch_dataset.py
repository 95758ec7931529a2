"""Module for turning manifest records into network inputs, augmented for training."""

import numpy as np
import numpy.typing as npt
import torch
from torch.utils.data import Dataset

from multipod.constants import Mode
from multipod.data_handling.packets.subject_record import Manifest
from multipod.pipeline.augmentation import AugPolicy, apply_policy
from multipod.pipeline.image_ops import ImageBuffer, prepare_record
from multipod.pipeline.patches import augment_patchset, extract_patches, patchset_to_array
from multipod.utils import sample_rng

Sample = tuple[torch.Tensor, torch.Tensor, torch.Tensor]
"""(patches, age in years, stage index)"""


class PatchDataset(Dataset[Sample]):
    """
    The records of a manifest as (patches, age, label) samples. Every region of interest is read
    and resized once, up front, so a broken image fails before training starts.

    In train mode a sample is augmented with the whole-image policy and, if enabled, with patch
    augmentation. Its random draws come from a generator keyed by (seed, epoch, index), so a
    sample is the same whichever worker prepares it. In eval mode samples are never augmented.
    """

    def __init__(
        self,
        manifest: Manifest,
        mode: Mode,
        policy: AugPolicy | None = None,
        patch_aug: bool = True,
        seed: int = 0,
        views: int = 1,
    ) -> None:
        """
        :param manifest: The records.
        :param mode: Whether samples are augmented.
        :param policy: The whole-image policy of train mode. Defaults to translate-ac.
        :param patch_aug: Whether train mode also rotates and jitters the patches.
        :param seed: Base seed of the augmentation draws.
        :param views: How many independently augmented copies of the patches a sample holds. With
            more than one, samples are (views, 3, 35, 35) instead of (3, 35, 35).
        """
        self.mode = mode
        self.policy = policy if policy is not None else AugPolicy()
        self.patch_aug = patch_aug
        self.seed = seed
        self.views = views
        self.epoch = 0
        self._rois: list[ImageBuffer] = [prepare_record(record) for record in manifest.records]
        self._ages = torch.tensor([record.age_years for record in manifest.records])
        self._labels = torch.tensor([record.stage.index for record in manifest.records])

    def __len__(self) -> int:
        return len(self._rois)

    @property
    def labels(self) -> torch.Tensor:
        """(N,) stage indices in manifest order."""
        return self._labels

    def set_epoch(self, epoch: int) -> None:
        """Selects the augmentation draws of an epoch."""
        self.epoch = epoch

    def _view(self, roi: ImageBuffer, rng: np.random.Generator | None) -> npt.NDArray[np.float32]:
        if rng is None:
            return patchset_to_array(extract_patches(roi))
        patch_set = extract_patches(apply_policy(self.policy, roi, rng))
        if self.patch_aug:
            patch_set = augment_patchset(patch_set, rng)
        return patchset_to_array(patch_set)

    def __getitem__(self, index: int) -> Sample:
        roi = self._rois[index]
        rng = sample_rng(self.seed, self.epoch, index) if self.mode is Mode.TRAIN else None
        arrays = [self._view(roi, rng) for _ in range(self.views)]
        patches = torch.from_numpy(arrays[0] if self.views == 1 else np.stack(arrays))
        return patches, self._ages[index], self._labels[index]
