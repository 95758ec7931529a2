"""Module for the MultiPod network: parallel pods over the vertebra patches, fused with the age."""

import math

import msgspec
import numpy as np
import numpy.typing as npt
import torch
from torch import nn

from multipod.constants import (
    AGE_NOISE_VARIANCE,
    AGE_REPEAT,
    AGE_SCALE,
    BLOCKS_PER_STAGE,
    DEFAULT_FILTER_SIGMA,
    FusionKind,
    NUM_ORIENTATIONS,
    NUM_PATCHES,
    NUM_STAGES,
    PATCH_SIZE,
    POD_ROUTING,
    SEED_MASK,
    STAGE_WIDTHS,
    Mode,
    PodVariant,
    Stage,
)
from multipod.errors import ConfigError, ShapeError
from multipod.model.backbone import PodBackbone
from multipod.model.filters import DirectionalFilterLayer, build_bank
from multipod.pipeline.patches import PatchSet, patchset_to_array
from multipod.training.loss import cross_entropy
from multipod.utils import torch_generator


class MultiPodConfig(msgspec.Struct, frozen=True):
    """
    Describes a MultiPod network. Two configs that only differ by seed or trainable_filters
    describe networks with the same parameter layout.
    """

    variant: PodVariant = PodVariant.TRI
    fusion: FusionKind = FusionKind.CONCAT
    """Add fusion sums the pod features, so the fusion layer is the same size for every variant."""
    use_directional_filters: bool = True
    trainable_filters: bool = True
    """False freezes the filter bank at its initial coefficients."""
    use_age: bool = True
    seed: int = 0
    filter_sigma: float = DEFAULT_FILTER_SIGMA
    widths: tuple[int, ...] = STAGE_WIDTHS
    """Channels of the three residual stages. Narrower widths give small test models."""
    blocks_per_stage: int = BLOCKS_PER_STAGE

    def __post_init__(self) -> None:
        if len(self.widths) != 3 or min(self.widths) < 1:
            raise ConfigError(f"widths must be three positive integers, got {self.widths}")
        if self.blocks_per_stage < 1:
            raise ConfigError(f"blocks_per_stage must be at least 1, got {self.blocks_per_stage}")
        if not self.filter_sigma > 0:
            raise ConfigError(f"filter_sigma must be positive, got {self.filter_sigma}")

    @property
    def pod_count(self) -> int:
        """1, 2, 3, 4 and 3 pods for single, du, tri, quad and stack."""
        return len(POD_ROUTING[self.variant])

    @property
    def pod_input_channels(self) -> int:
        """Channels a pod reads: one patch, or the three stacked patches for StackNet."""
        return NUM_PATCHES if self.variant is PodVariant.STACK else 1

    def same_layout(self, other: "MultiPodConfig") -> bool:
        """Whether a network built from `other` has the same named parameters and shapes."""
        return (
            self.variant,
            self.fusion,
            self.use_directional_filters,
            self.use_age,
            tuple(self.widths),
            self.blocks_per_stage,
        ) == (
            other.variant,
            other.fusion,
            other.use_directional_filters,
            other.use_age,
            tuple(other.widths),
            other.blocks_per_stage,
        )


class Pod(nn.Module):
    """
    One parallel branch: the optional directional filter bank followed by a backbone.
    """

    def __init__(self, cfg: MultiPodConfig) -> None:
        super().__init__()
        in_channels = cfg.pod_input_channels
        self.filters: DirectionalFilterLayer | None = None
        if cfg.use_directional_filters:
            bank = build_bank(cfg.filter_sigma, trainable=cfg.trainable_filters)
            self.filters = DirectionalFilterLayer(bank)
            in_channels *= NUM_ORIENTATIONS
        self.backbone = PodBackbone(in_channels, cfg.widths, cfg.blocks_per_stage)

    def filtered(self, x: torch.Tensor) -> torch.Tensor:
        """The input of the backbone for pod input x."""
        return x if self.filters is None else self.filters(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone(self.filtered(x))


def age_feature(
    ages: torch.Tensor | float, mode: Mode, generator: torch.Generator | None = None
) -> torch.Tensor:
    """
    The age input of the fusion layer: AGE_SCALE * age repeated AGE_REPEAT times. In train mode
    every entry also gets independent zero mean Gaussian noise of variance AGE_NOISE_VARIANCE.
    :param ages: Ages in years, a scalar or a (B,) tensor.
    :param generator: Source of the noise, required in train mode.
    :return: (AGE_REPEAT,) for a scalar age, (B, AGE_REPEAT) otherwise.
    """
    ages = torch.as_tensor(ages)
    if not ages.is_floating_point():
        ages = ages.to(torch.get_default_dtype())
    if bool((ages < 0).any()):
        raise ValueError("ages must be non-negative")
    feature = (AGE_SCALE * ages).unsqueeze(-1).expand(*ages.shape, AGE_REPEAT).clone()
    if mode is Mode.TRAIN:
        if generator is None:
            raise ValueError("train mode age noise needs a generator")
        noise = torch.randn(feature.shape, generator=generator, dtype=feature.dtype)
        feature += math.sqrt(AGE_NOISE_VARIANCE) * noise
    return feature


class MultiPodNet(nn.Module):
    """
    pod_count pods with their own weights, whose pooled features are concatenated (or summed)
    with the age feature and mapped to six stage logits by one fully connected layer.
    """

    def __init__(self, cfg: MultiPodConfig) -> None:
        super().__init__()
        self.cfg = cfg
        # Completed training epochs, stored in checkpoints
        self.epoch = 0
        self.routing = POD_ROUTING[cfg.variant]
        self.pods = nn.ModuleList(Pod(cfg) for _ in range(cfg.pod_count))
        pod_features = cfg.widths[-1] * (cfg.pod_count if cfg.fusion is FusionKind.CONCAT else 1)
        fusion_inputs = pod_features + (AGE_REPEAT if cfg.use_age else 0)
        self.fusion = nn.Linear(fusion_inputs, NUM_STAGES)

    def pod_inputs(self, patches: torch.Tensor) -> list[torch.Tensor]:
        """
        Routes the patches to the pods.
        :param patches: (B, 3, 35, 35) patches shared by every pod, or (B, pod_count, 3, 35, 35)
            with a separately augmented view per pod.
        :return: One (B, C, 35, 35) tensor per pod.
        """
        if patches.ndim == 4:
            views = [patches] * self.cfg.pod_count
        elif patches.ndim == 5 and patches.shape[1] == self.cfg.pod_count:
            views = list(patches.unbind(1))
        else:
            raise ShapeError(
                f"a {self.cfg.variant} network takes (B, 3, 35, 35) or "
                f"(B, {self.cfg.pod_count}, 3, 35, 35) patches, got {tuple(patches.shape)}"
            )
        if tuple(views[0].shape[1:]) != (NUM_PATCHES, PATCH_SIZE, PATCH_SIZE):
            raise ShapeError(
                f"patch tensors must hold 3 35x35 patches, got {tuple(patches.shape)}"
            )

        if self.cfg.variant is PodVariant.STACK:
            return views
        return [view[:, index : index + 1] for view, index in zip(views, self.routing, strict=True)]

    def features(self, patches: torch.Tensor) -> torch.Tensor:
        """
        Pooled pod features, (B, pod_count * pod features) concatenated with pod 0 first, or
        (B, pod features) summed over the pods for add fusion.
        """
        pooled = [pod(x) for pod, x in zip(self.pods, self.pod_inputs(patches), strict=True)]
        if self.cfg.fusion is FusionKind.ADD:
            return torch.stack(pooled).sum(dim=0)
        return torch.cat(pooled, dim=1)

    def forward(
        self,
        patches: torch.Tensor,
        ages: torch.Tensor | None = None,
        generator: torch.Generator | None = None,
    ) -> torch.Tensor:
        """
        :param patches: See pod_inputs.
        :param ages: (B,) ages in years. Required when the config uses the age.
        :param generator: Source of the age noise in training mode. Defaults to the generator of
            the current epoch under the config seed.
        :return: (B, 6) logits.
        """
        fused = [self.features(patches)]
        if self.cfg.use_age:
            if ages is None:
                raise ValueError("this network uses the age, but no ages were given")
            mode = Mode.TRAIN if self.training else Mode.EVAL
            if mode is Mode.TRAIN and generator is None:
                generator = torch_generator(self.cfg.seed, self.epoch)
            fused.append(age_feature(ages, mode, generator).to(fused[0].dtype))
        return self.fusion(torch.cat(fused, dim=1))


def _init_pod(pod: Pod, generator: torch.Generator) -> None:
    for module in pod.backbone.modules():
        if isinstance(module, nn.Conv2d):
            nn.init.kaiming_normal_(
                module.weight, mode="fan_in", nonlinearity="relu", generator=generator
            )
        elif isinstance(module, nn.BatchNorm2d):
            nn.init.ones_(module.weight)
            nn.init.zeros_(module.bias)


def build_model(cfg: MultiPodConfig) -> MultiPodNet:
    """
    Builds and initializes a network. Pod k draws its weights from a generator seeded with
    seed ^ k and the fusion layer from seed ^ pod_count, so the pods start from different weights
    and the same config always gives the same parameters. The filter banks start from the
    analytic kernels.
    """
    model = MultiPodNet(cfg)
    for k, pod in enumerate(model.pods):
        _init_pod(pod, torch.Generator().manual_seed((cfg.seed ^ k) & SEED_MASK))

    bound = 1.0 / math.sqrt(model.fusion.in_features)
    nn.init.uniform_(
        model.fusion.weight,
        -bound,
        bound,
        generator=torch.Generator().manual_seed((cfg.seed ^ cfg.pod_count) & SEED_MASK),
    )
    nn.init.zeros_(model.fusion.bias)
    return model


def param_count(model: nn.Module) -> int:
    """
    Number of trainable scalars. A frozen filter bank does not count.
    """
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def forward(
    model: MultiPodNet,
    patch_set: PatchSet,
    age: float,
    mode: Mode = Mode.EVAL,
    generator: torch.Generator | None = None,
) -> npt.NDArray[np.float32]:
    """
    Logits for one patch set. The model is left in the mode it was in.
    """
    was_training = model.training
    model.train(mode is Mode.TRAIN)
    try:
        x = torch.from_numpy(patchset_to_array(patch_set)).unsqueeze(0)
        with torch.set_grad_enabled(mode is Mode.TRAIN):
            logits = model(x, torch.tensor([age]), generator)
    finally:
        model.train(was_training)
    return logits[0].detach().numpy()


def backward(
    model: MultiPodNet,
    patches: torch.Tensor,
    ages: torch.Tensor,
    labels: torch.Tensor,
    generator: torch.Generator | None = None,
) -> dict[str, torch.Tensor]:
    """
    Gradients of the mean cross-entropy of a batch, in train mode, for every parameter. Frozen
    parameters get an all-zero gradient.
    :param labels: (B,) stage indices.
    :return: Parameter name -> gradient, with the shape of the parameter.
    """
    model.train()
    model.zero_grad(set_to_none=True)
    loss = cross_entropy(model(patches, ages, generator), labels)
    loss.backward()
    return {
        name: param.grad.detach().clone() if param.grad is not None else torch.zeros_like(param)
        for name, param in model.named_parameters()
    }


def predict_stage(logits: torch.Tensor | npt.ArrayLike) -> Stage:
    """
    The stage with the largest logit. Ties go to the lower stage.
    """
    return Stage.from_index(int(np.argmax(np.asarray(logits))))
