"""Module defining the base class (BasePolicy) for whole-image augmentation policies."""

from abc import ABC, abstractmethod

import numpy as np

from multipod.pipeline.image_ops import ImageBuffer


class BasePolicy(ABC):
    """
    Represents a data augmentation policy. A policy turns a region of interest into a randomly
    perturbed region of interest of the same shape, with intensities kept in [0, 255]. All
    randomness comes from the generator passed to apply.
    """

    __slots__ = ()

    @property
    def name(self) -> str:
        """
        :return: The name of the policy
        """
        return self.__class__.__name__

    @abstractmethod
    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        """
        Augments one image.
        :param img: The region of interest to augment. It is never modified in place.
        :param rng: The generator every random draw is taken from.
        """
