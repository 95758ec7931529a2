"""Module for stochastic gradient descent with momentum and its step learning-rate schedule."""

from collections.abc import Iterable, Sequence
from typing import TYPE_CHECKING, override

import torch

from multipod.constants import (
    LEARNING_RATE,
    MILESTONES,
    MOMENTUM,
    REFERENCE_EPOCHS,
    WEIGHT_DECAY,
)

if TYPE_CHECKING:
    from multipod.training.trainer import TrainConfig


def sgd_step(
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor],
    velocity: Sequence[torch.Tensor],
    lr: float,
    momentum: float = MOMENTUM,
    weight_decay: float = WEIGHT_DECAY,
) -> tuple[list[torch.Tensor], list[torch.Tensor]]:
    """
    One momentum step. Weight decay enters as an extra gradient term:
        v <- momentum * v + (grad + weight_decay * param)
        param <- param - lr * v
    The inputs are not modified.
    :return: (new params, new velocities)
    """
    if not len(params) == len(grads) == len(velocity):
        raise ValueError(
            f"{len(params)} params, {len(grads)} grads and {len(velocity)} velocities"
        )
    new_params = []
    new_velocity = []
    for param, grad, v in zip(params, grads, velocity, strict=True):
        if param.shape != grad.shape or param.shape != v.shape:
            raise ValueError(
                f"shape mismatch: param {tuple(param.shape)}, grad {tuple(grad.shape)}, "
                f"velocity {tuple(v.shape)}"
            )
        v = momentum * v + (grad + weight_decay * param)
        new_velocity.append(v)
        new_params.append(param - lr * v)
    return new_params, new_velocity


class MomentumSGD(torch.optim.Optimizer):
    """
    torch optimizer around sgd_step. Parameters without a gradient (frozen ones) are left alone,
    weight decay included.
    """

    def __init__(
        self,
        params: Iterable[torch.nn.Parameter],
        lr: float = LEARNING_RATE,
        momentum: float = MOMENTUM,
        weight_decay: float = WEIGHT_DECAY,
    ) -> None:
        if lr <= 0 or momentum < 0 or weight_decay < 0:
            raise ValueError(
                f"invalid hyperparameters lr={lr}, momentum={momentum}, "
                f"weight_decay={weight_decay}"
            )
        super().__init__(params, {"lr": lr, "momentum": momentum, "weight_decay": weight_decay})

    def set_lr(self, lr: float) -> None:
        """Sets the learning rate of every parameter group."""
        for group in self.param_groups:
            group["lr"] = lr

    @override
    @torch.no_grad()
    def step(self, closure: None = None) -> None:
        for group in self.param_groups:
            params = [p for p in group["params"] if p.grad is not None]
            if not params:
                continue
            velocity = []
            for p in params:
                state = self.state[p]
                if "velocity" not in state:
                    state["velocity"] = torch.zeros_like(p)
                velocity.append(state["velocity"])

            new_params, new_velocity = sgd_step(
                params,
                [p.grad for p in params],
                velocity,
                group["lr"],
                group["momentum"],
                group["weight_decay"],
            )
            for p, new_p, new_v in zip(params, new_params, new_velocity, strict=True):
                p.copy_(new_p)
                self.state[p]["velocity"] = new_v


def scaled_milestones(
    epochs: int, milestones: Sequence[int] = MILESTONES, reference: int = REFERENCE_EPOCHS
) -> tuple[int, ...]:
    """
    Stretches the decay epochs of a `reference` epoch schedule to a run of `epochs` epochs,
    rounding to the nearest epoch. Milestones that collapse onto each other, onto epoch 0 or
    past the end of the run are dropped.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be at least 1, got {epochs}")
    scaled: list[int] = []
    for milestone in milestones:
        epoch = round(milestone * epochs / reference)
        if 0 < epoch < epochs and (not scaled or epoch > scaled[-1]):
            scaled.append(epoch)
    return tuple(scaled)


def lr_at(epoch: int, cfg: "TrainConfig") -> float:
    """
    The learning rate of an epoch: lr0 * decay_factor ** (number of milestones <= epoch).
    """
    if not 0 <= epoch < cfg.epochs:
        raise ValueError(f"epoch {epoch} is outside a {cfg.epochs} epoch run")
    decays = sum(1 for milestone in cfg.schedule if milestone <= epoch)
    # Twelve significant digits drop the representation error of products like 0.1 * 0.1
    return float(f"{cfg.lr0 * cfg.decay_factor**decays:.12g}")

