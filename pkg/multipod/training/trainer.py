"""Module for the training loop: epochs of shuffled mini-batches with a per-epoch evaluation."""

import math
from pathlib import Path

import msgspec
import numpy as np
import numpy.typing as npt
import torch
from torch.utils.data import DataLoader

from multipod.constants import (
    BATCH_SIZE,
    CHECKPOINT_FILE_NAME,
    DECAY_FACTOR,
    EPOCHS,
    LEARNING_RATE,
    MOMENTUM,
    SUMMARY_FILE_NAME,
    WEIGHT_DECAY,
    Mode,
    PodVariant,
)
from multipod.data_handling.logger import RunLogger
from multipod.data_handling.packets.epoch_data_packet import EpochDataPacket
from multipod.data_handling.packets.subject_record import Manifest
from multipod.data_handling.patch_dataset import PatchDataset
from multipod.display import TrainingDisplay
from multipod.errors import ConfigError, ManifestError
from multipod.evaluation.evaluator import predict_dataset
from multipod.model.checkpoint import save_checkpoint
from multipod.model.multipod_net import MultiPodNet
from multipod.pipeline.augmentation import AugPolicy
from multipod.training.loss import cross_entropy
from multipod.training.optimizer import MomentumSGD, lr_at, scaled_milestones
from multipod.utils import epoch_rng, torch_generator


class TrainConfig(msgspec.Struct, frozen=True):
    """
    Describes a training run. Without explicit milestones the 25/50/75 schedule of a 100 epoch
    run is stretched to `epochs`.
    """

    lr0: float = LEARNING_RATE
    momentum: float = MOMENTUM
    weight_decay: float = WEIGHT_DECAY
    batch_size: int = BATCH_SIZE
    epochs: int = EPOCHS
    milestones: tuple[int, ...] | None = None
    decay_factor: float = DECAY_FACTOR
    seed: int = 0
    data_policy: AugPolicy = msgspec.field(default_factory=AugPolicy)
    patch_aug: bool = True
    workers: int = 0
    """DataLoader worker processes. The results do not depend on it."""
    checkpoint_every: int = 0
    """Also write a checkpoint every k epochs. 0 writes only the final one."""

    def __post_init__(self) -> None:
        if self.lr0 <= 0 or self.decay_factor <= 0:
            raise ConfigError("lr0 and decay_factor must be positive")
        if self.momentum < 0 or self.weight_decay < 0:
            raise ConfigError("momentum and weight_decay must be non-negative")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be at least 2, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
        if self.workers < 0 or self.checkpoint_every < 0:
            raise ConfigError("workers and checkpoint_every must be non-negative")
        if self.milestones is not None:
            steps = list(self.milestones)
            if any(b <= a for a, b in zip(steps, steps[1:], strict=False)) or any(
                not 0 <= m < self.epochs for m in steps
            ):
                raise ConfigError(
                    f"milestones {self.milestones} must increase strictly and stay below "
                    f"{self.epochs}"
                )

    @property
    def schedule(self) -> tuple[int, ...]:
        """The epochs at which the learning rate decays."""
        if self.milestones is not None:
            return self.milestones
        return scaled_milestones(self.epochs)


class RunLog(msgspec.Struct):
    """
    The records of every completed epoch of a run, in order.
    """

    records: list[EpochDataPacket] = msgspec.field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> EpochDataPacket:
        """The record of the last epoch."""
        return self.records[-1]

    @property
    def best(self) -> EpochDataPacket:
        """The record with the highest test accuracy. The earliest such epoch wins a tie."""
        return max(self.records, key=lambda record: (record.test_acc, -record.epoch))


class RunSummary(msgspec.Struct, frozen=True):
    """
    What summary.json holds: the final and the best-test epochs, and the configs of the run.
    """

    final_epoch: int
    final_train_acc: float
    final_test_acc: float
    best_epoch: int
    best_test_acc: float
    model_config: dict[str, object]
    train_config: dict[str, object]
    n_train: int
    n_test: int


def plan_batches(order: npt.ArrayLike, batch_size: int) -> list[list[int]]:
    """
    Splits an epoch permutation into consecutive batches of batch_size. The last batch may be
    shorter, but a single leftover sample joins the batch before it: batch normalization needs
    at least two samples.
    """
    indices = [int(index) for index in np.asarray(order)]
    batches = [indices[start : start + batch_size] for start in range(0, len(indices), batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2].extend(batches.pop())
    return batches


def _check_manifests(train_manifest: Manifest, test_manifest: Manifest) -> None:
    if not len(train_manifest):
        raise ManifestError("the training manifest is empty")
    if not len(test_manifest):
        raise ManifestError("the test manifest is empty")


def train(
    model: MultiPodNet,
    train_manifest: Manifest,
    test_manifest: Manifest,
    cfg: TrainConfig,
    out_dir: Path | None = None,
    display: TrainingDisplay | None = None,
) -> tuple[MultiPodNet, RunLog]:
    """
    Trains a model with momentum SGD and the step schedule, evaluating it on the test manifest
    after every epoch.

    Every epoch shuffles the training records with a generator seeded by (seed, epoch), so the
    run is fully determined by its inputs and config. Augmentation only ever touches training
    records.
    :param model: The network to train, in place.
    :param out_dir: When given, receives runlog.csv, summary.json and the checkpoints.
    :param display: Prints a line per epoch when given.
    :return: (the trained model, the per-epoch records)
    """
    _check_manifests(train_manifest, test_manifest)
    views = model.cfg.pod_count if model.cfg.variant is PodVariant.STACK else 1
    train_set = PatchDataset(
        train_manifest,
        Mode.TRAIN,
        policy=cfg.data_policy,
        patch_aug=cfg.patch_aug,
        seed=cfg.seed,
        views=views,
    )
    test_set = PatchDataset(test_manifest, Mode.EVAL)
    test_labels = test_set.labels.numpy()

    optimizer = MomentumSGD(
        [p for p in model.parameters() if p.requires_grad],
        lr=cfg.lr0,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
    )
    logger = RunLogger(out_dir) if out_dir is not None else None
    run_log = RunLog()
    start_epoch = model.epoch

    try:
        for epoch in range(cfg.epochs):
            lr = lr_at(epoch, cfg)
            optimizer.set_lr(lr)
            train_set.set_epoch(epoch)
            order = epoch_rng(cfg.seed, epoch).permutation(len(train_set))
            batches = plan_batches(order, cfg.batch_size)
            loader = DataLoader(train_set, batch_sampler=batches, num_workers=cfg.workers)
            generator = torch_generator(cfg.seed, epoch)

            model.train()
            loss_sum = 0.0
            correct = 0
            for patches, ages, labels in loader:
                logits = model(patches, ages, generator)
                loss = cross_entropy(logits, labels)
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                optimizer.step()
                loss_sum += float(loss.detach()) * len(labels)
                correct += int((logits.detach().argmax(dim=1) == labels).sum())

            model.epoch = start_epoch + epoch + 1
            predictions = predict_dataset(model, test_set, workers=cfg.workers)
            record = EpochDataPacket(
                epoch=epoch,
                train_loss=loss_sum / len(train_set),
                train_acc=correct / len(train_set),
                test_acc=float(np.mean(predictions == test_labels)),
                lr=lr,
            )
            run_log.records.append(record)
            if logger is not None:
                logger.log(record)
            if display is not None:
                display.epoch(record, cfg.epochs)
            if (
                out_dir is not None
                and cfg.checkpoint_every
                and (epoch + 1) % cfg.checkpoint_every == 0
                and epoch + 1 < cfg.epochs
            ):
                save_checkpoint(model, Path(out_dir) / f"model_epoch{epoch + 1:04d}.ckpt")
    finally:
        if logger is not None:
            logger.stop()

    if out_dir is not None:
        save_checkpoint(model, Path(out_dir) / CHECKPOINT_FILE_NAME)
        write_summary(run_log, model, cfg, len(train_set), len(test_set), Path(out_dir))
    return model, run_log


def write_summary(
    run_log: RunLog, model: MultiPodNet, cfg: TrainConfig, n_train: int, n_test: int, out_dir: Path
) -> Path:
    """
    Writes summary.json next to the RunLog.
    """
    summary = RunSummary(
        final_epoch=run_log.final.epoch,
        final_train_acc=run_log.final.train_acc,
        final_test_acc=run_log.final.test_acc,
        best_epoch=run_log.best.epoch,
        best_test_acc=run_log.best.test_acc,
        model_config=msgspec.to_builtins(model.cfg),
        train_config=msgspec.to_builtins(cfg),
        n_train=n_train,
        n_test=n_test,
    )
    path = out_dir / SUMMARY_FILE_NAME
    path.write_bytes(msgspec.json.format(msgspec.json.encode(summary), indent=2) + b"\n")
    return path


def parameter_norm(model: torch.nn.Module) -> float:
    """L2 norm of every trainable parameter taken together."""
    with torch.no_grad():
        return math.sqrt(
            sum(float((p.double() ** 2).sum()) for p in model.parameters() if p.requires_grad)
        )
