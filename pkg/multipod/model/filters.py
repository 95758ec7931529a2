"""Module for the bank of eight oriented edge-enhancement kernels that precedes every pod."""

from pathlib import Path

import msgspec
import numpy as np
import numpy.typing as npt
import pandas as pd
import torch
import torch.nn.functional as F
from scipy import ndimage
from torch import nn

from multipod.constants import (
    DEFAULT_FILTER_SIGMA,
    FILTER_SIZE,
    FILTER_TILE_SCALE,
    FILTERS_FILE_NAME,
    MAX_INTENSITY,
    NUM_ORIENTATIONS,
)
from multipod.errors import ShapeError
from multipod.pipeline.image_ops import ImageBuffer, as_buffer, save_image

PAD = FILTER_SIZE // 2


class DirectionalFilterBank(msgspec.Struct, frozen=True):
    """
    Eight FILTER_SIZE x FILTER_SIZE kernels. Kernel k is the first derivative of a Gaussian along
    the direction k * 22.5 degrees (x to the right, y down), with zero sum and unit L2 norm. The
    kernels are odd, so orientations 180 degrees apart would only differ in sign and half a turn
    covers every edge direction.
    """

    kernels: npt.NDArray[np.float64]
    """Shape (NUM_ORIENTATIONS, FILTER_SIZE, FILTER_SIZE)."""
    orientations: tuple[float, ...]
    """Orientation of every kernel in degrees."""
    sigma: float
    trainable: bool
    """Whether a model built on this bank may update the coefficients."""


def build_bank(
    sigma: float = DEFAULT_FILTER_SIGMA, trainable: bool = True
) -> DirectionalFilterBank:
    """
    Builds the directional filter bank. The coefficients depend only on sigma.
    :param sigma: Gaussian scale in pixels.
    :param trainable: Stored on the bank, the model decides what to do with it.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")

    offsets = np.arange(FILTER_SIZE, dtype=np.float64) - PAD
    y, x = np.meshgrid(offsets, offsets, indexing="ij")
    gaussian = np.exp(-(x**2 + y**2) / (2.0 * sigma**2))

    orientations = tuple(180.0 * k / NUM_ORIENTATIONS for k in range(NUM_ORIENTATIONS))
    kernels = np.empty((NUM_ORIENTATIONS, FILTER_SIZE, FILTER_SIZE), dtype=np.float64)
    for k, degrees in enumerate(orientations):
        theta = np.deg2rad(degrees)
        kernel = (x * np.cos(theta) + y * np.sin(theta)) / sigma**2 * gaussian
        # Odd kernels already sum to zero up to rounding, remove the residue exactly
        kernel -= kernel.mean()
        kernels[k] = kernel / np.linalg.norm(kernel)

    return DirectionalFilterBank(
        kernels=kernels, orientations=orientations, sigma=float(sigma), trainable=trainable
    )


def apply_bank(img: ImageBuffer, bank: DirectionalFilterBank) -> ImageBuffer:
    """
    Correlates every channel of an image with every kernel, keeping the image size. The image is
    padded by repeating its edge pixels. Output channel c * 8 + k is input channel c under
    kernel k.
    :param img: An (H, W, C) buffer with H, W >= FILTER_SIZE.
    :return: An (H, W, 8 * C) buffer.
    """
    height, width, channels = img.shape
    if height < FILTER_SIZE or width < FILTER_SIZE:
        raise ShapeError(
            f"a {height}x{width} image is smaller than the {FILTER_SIZE}x{FILTER_SIZE} kernels"
        )
    source = img.astype(np.float64)
    responses = [
        ndimage.correlate(source[:, :, channel], kernel, mode="nearest")
        for channel in range(channels)
        for kernel in bank.kernels
    ]
    return np.stack(responses, axis=2).astype(np.float32)


def dominant_orientation(bank: DirectionalFilterBank, edge_img: ImageBuffer) -> int:
    """
    The kernel that responds most strongly to a straight step edge: the channel with the largest
    mean absolute response over the interior pixels the padding cannot reach.
    :param edge_img: A single channel image holding one straight edge.
    """
    response = apply_bank(edge_img[:, :, :1], bank).astype(np.float64)
    interior = np.abs(response[PAD:-PAD, PAD:-PAD])
    return int(np.argmax(interior.mean(axis=(0, 1))))


class DirectionalFilterLayer(nn.Module):
    """
    The filter bank as the first layer of a pod. The eight kernels are shared by every input
    channel, as in apply_bank, and are a trainable parameter unless the bank is frozen.
    """

    def __init__(self, bank: DirectionalFilterBank) -> None:
        super().__init__()
        self.weight = nn.Parameter(
            torch.from_numpy(bank.kernels.astype(np.float32)).clone(),
            requires_grad=bank.trainable,
        )

    @property
    def trainable(self) -> bool:
        """Whether the kernels receive gradients."""
        return self.weight.requires_grad

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C, H, W) -> (B, 8 * C, H, W)"""
        channels = x.shape[1]
        # Channel-major, orientation-minor: group c holds kernels 0..7 for input channel c
        weight = self.weight.to(x.dtype).unsqueeze(1).repeat(channels, 1, 1, 1)
        padded = F.pad(x, (PAD, PAD, PAD, PAD), mode="replicate")
        return F.conv2d(padded, weight, groups=channels)


def normalize_tile(values: npt.ArrayLike) -> ImageBuffer:
    """Stretches a 2D array to [0, 255] for viewing. A constant array becomes mid-gray."""
    array = np.asarray(values, dtype=np.float64)
    low, high = float(array.min()), float(array.max())
    if high <= low:
        return as_buffer(np.full(array.shape, MAX_INTENSITY / 2))
    return as_buffer((array - low) / (high - low) * MAX_INTENSITY)


def export_bank(bank: DirectionalFilterBank, out_dir: Path) -> list[Path]:
    """
    Writes the kernels to filters.csv (one line per kernel row, the seven coefficients in
    columns c0..c6) and to one enlarged PNG tile per orientation.
    :return: The paths written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [
        {
            "orientation": k,
            "degrees": degrees,
            "row": row,
            **{f"c{col}": float(bank.kernels[k, row, col]) for col in range(FILTER_SIZE)},
        }
        for k, degrees in enumerate(bank.orientations)
        for row in range(FILTER_SIZE)
    ]
    csv_path = out_dir / FILTERS_FILE_NAME
    pd.DataFrame(rows).to_csv(csv_path, index=False, float_format="%.10f", lineterminator="\n")

    paths = [csv_path]
    for k, kernel in enumerate(bank.kernels):
        tile = np.kron(kernel, np.ones((FILTER_TILE_SCALE, FILTER_TILE_SCALE)))
        paths.append(save_image(normalize_tile(tile), out_dir / f"filter_{k}.png"))
    return paths
