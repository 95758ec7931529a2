"""Tests for the RunLog logger, config files and the seeded generators."""

from pathlib import Path

import numpy as np
import pytest
import torch

from multipod.data_handling.logger import RunLogger, read_runlog
from multipod.data_handling.packets.epoch_data_packet import EpochDataPacket
from multipod.utils import (
    check_seed,
    default_seed,
    epoch_rng,
    parse_config_file,
    sample_rng,
    torch_generator,
)


def test_runlog_format(tmp_path: Path):
    with RunLogger(tmp_path) as logger:
        assert logger.is_running
        logger.log(EpochDataPacket(epoch=0, train_loss=0.5, train_acc=0.25, test_acc=1 / 3, lr=0.1))
        logger.log(EpochDataPacket(epoch=1, train_loss=0.25, train_acc=0.5, test_acc=0.5, lr=0.01))
    assert not logger.is_running
    assert (tmp_path / "runlog.csv").read_text() == (
        "epoch,train_loss,train_acc,test_acc,lr\n"
        "0,0.50000000,0.25000000,0.33333333,0.10000000\n"
        "1,0.25000000,0.50000000,0.50000000,0.01000000\n"
    )
    frame = read_runlog(tmp_path / "runlog.csv")
    assert frame["epoch"].tolist() == [0, 1]
    assert frame["lr"].tolist() == pytest.approx([0.1, 0.01])


def test_runlogger_replaces_an_old_log(tmp_path: Path):
    with RunLogger(tmp_path) as logger:
        logger.log(EpochDataPacket(epoch=0, train_loss=1.0, train_acc=0.0, test_acc=0.0, lr=0.1))
    RunLogger(tmp_path).stop()
    assert len(read_runlog(tmp_path / "runlog.csv")) == 0


def test_read_runlog_rejects_other_csv(tmp_path: Path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="not a RunLog"):
        read_runlog(path)


def test_parse_config_file(tmp_path: Path):
    path = tmp_path / "run.cfg"
    path.write_text("# header\n\nepochs = 3\ncheckpoint-every=2 # inline\nsex=F\n")
    assert parse_config_file(path) == {"epochs": "3", "checkpoint_every": "2", "sex": "F"}


@pytest.mark.parametrize("line", ["epochs", "=3"])
def test_parse_config_file_errors(tmp_path: Path, line: str):
    path = tmp_path / "run.cfg"
    path.write_text(f"seed=1\n{line}\n")
    with pytest.raises(ValueError, match="run.cfg:2"):
        parse_config_file(path)


def test_default_seed(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv("MULTIPOD_SEED", raising=False)
    assert default_seed() == 0
    monkeypatch.setenv("MULTIPOD_SEED", " 42 ")
    assert default_seed() == 42
    monkeypatch.setenv("MULTIPOD_SEED", "x")
    with pytest.raises(ValueError, match="MULTIPOD_SEED"):
        default_seed()


def test_generators_depend_only_on_their_keys():
    assert np.array_equal(sample_rng(3, 1, 7).random(5), sample_rng(3, 1, 7).random(5))
    assert not np.array_equal(sample_rng(3, 1, 7).random(5), sample_rng(3, 1, 8).random(5))
    assert not np.array_equal(sample_rng(3, 1, 7).random(5), sample_rng(3, 2, 7).random(5))
    assert np.array_equal(epoch_rng(3, 4).permutation(20), epoch_rng(3, 4).permutation(20))
    assert not np.array_equal(epoch_rng(3, 4).random(5), epoch_rng(4, 4).random(5))

    first = torch.randn(4, generator=torch_generator(3, 0))
    assert torch.equal(first, torch.randn(4, generator=torch_generator(3, 0)))
    assert not torch.equal(first, torch.randn(4, generator=torch_generator(3, 1)))


def test_negative_and_huge_seeds_are_accepted():
    assert sample_rng(-1, 0, 0).random() == sample_rng(2**64 - 1, 0, 0).random()


def test_check_seed_bounds():
    assert check_seed(0) == 0
    assert check_seed(2**64 - 1) == 2**64 - 1
    for bad in (-1, 2**64):
        with pytest.raises(ValueError, match=r"\[0, 2\*\*64\)"):
            check_seed(bad)
