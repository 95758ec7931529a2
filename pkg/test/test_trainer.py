"""Tests for the training loop."""

from pathlib import Path

import msgspec
import numpy as np
import pytest
import torch

from multipod.constants import Mode, PodVariant, PolicyKind
from multipod.data_handling import patch_dataset
from multipod.data_handling.logger import read_runlog
from multipod.data_handling.packets.epoch_data_packet import EpochDataPacket
from multipod.data_handling.packets.subject_record import Manifest
from multipod.errors import ConfigError, ManifestError
from multipod.evaluation.evaluator import evaluate
from multipod.model.multipod_net import MultiPodConfig, build_model
from multipod.pipeline.augmentation import AugPolicy
from multipod.training.optimizer import lr_at
from multipod.training.trainer import RunLog, TrainConfig, parameter_norm, plan_batches, train
from multipod.utils import epoch_rng


def test_plan_batches():
    assert plan_batches(range(8), 4) == [[0, 1, 2, 3], [4, 5, 6, 7]]
    assert plan_batches(range(9), 4) == [[0, 1, 2, 3], [4, 5, 6, 7, 8]]
    assert plan_batches(range(10), 4) == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]
    assert plan_batches([5], 4) == [[5]]


def test_every_record_once_per_epoch():
    for epoch in range(3):
        order = epoch_rng(0, epoch).permutation(13)
        batches = plan_batches(order, 4)
        assert sorted(i for batch in batches for i in batch) == list(range(13))
        assert min(len(batch) for batch in batches) >= 2
    assert not np.array_equal(epoch_rng(0, 0).permutation(13), epoch_rng(0, 1).permutation(13))


def test_run_outputs(
    tmp_path: Path,
    small_config: MultiPodConfig,
    small_train_config: TrainConfig,
    synthetic_manifest: Manifest,
    synthetic_test_manifest: Manifest,
):
    model = build_model(small_config)
    cfg = msgspec.structs.replace(small_train_config, checkpoint_every=1)
    trained, run_log = train(model, synthetic_manifest, synthetic_test_manifest, cfg, tmp_path)

    assert trained is model
    assert model.epoch == 3
    assert [record.epoch for record in run_log.records] == [0, 1, 2]
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "model.ckpt",
        "model_epoch0001.ckpt",
        "model_epoch0002.ckpt",
        "runlog.csv",
        "summary.json",
    ]

    frame = read_runlog(tmp_path / "runlog.csv")
    assert frame["epoch"].tolist() == [0, 1, 2]
    assert frame["lr"].tolist() == pytest.approx([lr_at(e, cfg) for e in range(3)])
    assert frame["test_acc"].between(0.0, 1.0).all()
    assert np.isfinite(frame["train_loss"]).all()

    summary = msgspec.json.decode((tmp_path / "summary.json").read_bytes())
    assert summary["final_epoch"] == 2
    assert summary["best_epoch"] == run_log.best.epoch
    assert summary["n_train"] == 12
    assert summary["n_test"] == 6
    assert summary["model_config"]["variant"] == "tri"


def test_identical_runs_give_identical_files(
    tmp_path: Path,
    small_config: MultiPodConfig,
    small_train_config: TrainConfig,
    synthetic_manifest: Manifest,
    synthetic_test_manifest: Manifest,
):
    for name in ("a", "b"):
        train(
            build_model(small_config),
            synthetic_manifest,
            synthetic_test_manifest,
            small_train_config,
            tmp_path / name,
        )
    for file_name in ("runlog.csv", "model.ckpt", "summary.json"):
        assert (tmp_path / "a" / file_name).read_bytes() == (
            tmp_path / "b" / file_name
        ).read_bytes()


def test_augmentation_never_touches_test_records(
    monkeypatch: pytest.MonkeyPatch,
    small_config: MultiPodConfig,
    small_train_config: TrainConfig,
    synthetic_manifest: Manifest,
    synthetic_test_manifest: Manifest,
):
    calls = {"policy": 0, "patches": 0}
    apply_policy = patch_dataset.apply_policy
    augment_patchset = patch_dataset.augment_patchset

    def counting_policy(*args, **kwargs):
        calls["policy"] += 1
        return apply_policy(*args, **kwargs)

    def counting_patches(*args, **kwargs):
        calls["patches"] += 1
        return augment_patchset(*args, **kwargs)

    monkeypatch.setattr(patch_dataset, "apply_policy", counting_policy)
    monkeypatch.setattr(patch_dataset, "augment_patchset", counting_patches)

    model, _ = train(
        build_model(small_config), synthetic_manifest, synthetic_test_manifest, small_train_config
    )
    expected = small_train_config.epochs * len(synthetic_manifest)
    assert calls == {"policy": expected, "patches": expected}

    evaluate(model, synthetic_test_manifest)
    assert calls == {"policy": expected, "patches": expected}


def test_patch_augmentation_can_be_switched_off(
    monkeypatch: pytest.MonkeyPatch,
    small_config: MultiPodConfig,
    synthetic_manifest: Manifest,
    synthetic_test_manifest: Manifest,
):
    calls = []
    monkeypatch.setattr(patch_dataset, "augment_patchset", lambda *args: calls.append(args))
    cfg = TrainConfig(batch_size=4, epochs=1, patch_aug=False)
    train(build_model(small_config), synthetic_manifest, synthetic_test_manifest, cfg)
    assert calls == []


def test_stacknet_trains_on_separate_views(
    small_config: MultiPodConfig, synthetic_manifest: Manifest, synthetic_test_manifest: Manifest
):
    model = build_model(msgspec.structs.replace(small_config, variant=PodVariant.STACK))
    dataset = patch_dataset.PatchDataset(
        synthetic_manifest, Mode.TRAIN, views=model.cfg.pod_count
    )
    patches, _, _ = dataset[0]
    assert tuple(patches.shape) == (3, 3, 35, 35)
    assert not torch.equal(patches[0], patches[1])

    _, run_log = train(
        model, synthetic_manifest, synthetic_test_manifest, TrainConfig(batch_size=4, epochs=1)
    )
    assert len(run_log) == 1


def test_weight_decay_shrinks_the_parameters(
    small_config: MultiPodConfig, synthetic_manifest: Manifest, synthetic_test_manifest: Manifest
):
    norms = []
    for weight_decay in (0.0, 0.01):
        cfg = TrainConfig(
            batch_size=4,
            epochs=2,
            weight_decay=weight_decay,
            data_policy=AugPolicy(kind=PolicyKind.NONE),
        )
        model = build_model(small_config)
        train(model, synthetic_manifest, synthetic_test_manifest, cfg)
        norms.append(parameter_norm(model))
    assert norms[1] < norms[0]


def test_frozen_filters_stay_put_and_trainable_ones_move(
    small_config: MultiPodConfig, synthetic_manifest: Manifest, synthetic_test_manifest: Manifest
):
    cfg = TrainConfig(batch_size=4, epochs=1)
    for trainable in (False, True):
        model = build_model(msgspec.structs.replace(small_config, trainable_filters=trainable))
        before = model.pods[0].filters.weight.detach().clone()
        train(model, synthetic_manifest, synthetic_test_manifest, cfg)
        assert torch.equal(model.pods[0].filters.weight, before) is not trainable


def test_empty_manifests_are_rejected(
    small_config: MultiPodConfig, synthetic_manifest: Manifest
):
    empty = Manifest(records=())
    with pytest.raises(ManifestError, match="training"):
        train(build_model(small_config), empty, synthetic_manifest, TrainConfig(epochs=1))
    with pytest.raises(ManifestError, match="test"):
        train(build_model(small_config), synthetic_manifest, empty, TrainConfig(epochs=1))


def test_run_log_best_prefers_the_earliest_epoch():
    accuracies = [0.5, 0.75, 0.75, 0.25]
    run_log = RunLog(
        records=[
            EpochDataPacket(epoch=e, train_loss=1.0, train_acc=0.5, test_acc=acc, lr=0.1)
            for e, acc in enumerate(accuracies)
        ]
    )
    assert run_log.best.epoch == 1
    assert run_log.final.epoch == 3
    assert len(run_log) == 4


@pytest.mark.parametrize(
    "kwargs",
    [
        {"batch_size": 1},
        {"epochs": 0},
        {"lr0": 0.0},
        {"momentum": -0.1},
        {"epochs": 10, "milestones": (5, 5)},
        {"epochs": 10, "milestones": (3, 10)},
        {"workers": -1},
    ],
)
def test_bad_train_config(kwargs: dict):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)
