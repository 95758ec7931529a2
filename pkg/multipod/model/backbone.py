"""Module for the residual backbone of a pod: a 20-layer ResNet for 35x35 inputs."""

import torch
import torch.nn.functional as F
from torch import nn

from multipod.constants import BLOCKS_PER_STAGE, PATCH_SIZE, STAGE_WIDTHS
from multipod.errors import ShapeError


class BasicBlock(nn.Module):
    """
    Two 3x3 convolutions with batch normalization and an additive shortcut. A downsampling block
    halves the grid with an unpadded stride-2 first convolution (35 -> 17 -> 8). Its shortcut is a
    strided 1x1 projection of the input without its outer ring of pixels, which lands on the
    centers of the 3x3 windows of the main path.
    """

    def __init__(self, in_channels: int, out_channels: int, downsample: bool) -> None:
        super().__init__()
        stride, padding = (2, 0) if downsample else (1, 1)
        self.conv1 = nn.Conv2d(
            in_channels, out_channels, 3, stride=stride, padding=padding, bias=False
        )
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)

        self.downsample = downsample
        self.shortcut: nn.Sequential | None = None
        if downsample or in_channels != out_channels:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        if self.shortcut is None:
            identity = x
        elif self.downsample:
            identity = self.shortcut(x[:, :, 1:-1, 1:-1])
        else:
            identity = self.shortcut(x)
        return F.relu(out + identity)


class PodBackbone(nn.Module):
    """
    conv1 (3x3, widths[0]) followed by three stages of residual blocks and global average
    pooling. For a 35x35 input the stage outputs are 35x35, 17x17 and 8x8 with widths[0],
    widths[1] and widths[2] channels.
    """

    def __init__(
        self,
        in_channels: int,
        widths: tuple[int, ...] = STAGE_WIDTHS,
        blocks_per_stage: int = BLOCKS_PER_STAGE,
    ) -> None:
        super().__init__()
        self.in_channels = in_channels
        self.widths = tuple(widths)
        self.conv1 = nn.Conv2d(in_channels, widths[0], 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(widths[0])

        stages = []
        previous = widths[0]
        for stage_index, width in enumerate(widths):
            blocks = [
                BasicBlock(
                    previous if block == 0 else width,
                    width,
                    downsample=stage_index > 0 and block == 0,
                )
                for block in range(blocks_per_stage)
            ]
            stages.append(nn.Sequential(*blocks))
            previous = width
        self.stages = nn.ModuleList(stages)

    @property
    def out_features(self) -> int:
        """Length of the pooled feature vector."""
        return self.widths[-1]

    def forward_stages(self, x: torch.Tensor) -> list[torch.Tensor]:
        """
        Runs the backbone without pooling.
        :return: The activations after conv1 and after every stage, in order.
        """
        out = F.relu(self.bn1(self.conv1(x)))
        activations = [out]
        for stage in self.stages:
            out = stage(out)
            activations.append(out)
        return activations

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, in_channels, 35, 35) -> (B, out_features)"""
        return F.adaptive_avg_pool2d(self.forward_stages(x)[-1], 1).flatten(1)


def backbone_forward(backbone: PodBackbone, x: torch.Tensor) -> torch.Tensor:
    """
    Runs a pod backbone on filtered patches after checking the input geometry.
    :param x: (B, in_channels, PATCH_SIZE, PATCH_SIZE), or a single unbatched sample.
    :return: (B, out_features) pooled features.
    """
    if x.ndim == 3:
        x = x.unsqueeze(0)
    expected = (backbone.in_channels, PATCH_SIZE, PATCH_SIZE)
    if x.ndim != 4 or tuple(x.shape[1:]) != expected:
        raise ShapeError(f"backbone input must be (B, {expected}), got {tuple(x.shape)}")
    return backbone(x)
