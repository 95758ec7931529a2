"""Module for logging the per-epoch training records to a CSV file."""

import csv
from pathlib import Path

import pandas as pd
from msgspec import to_builtins

from multipod.constants import RUNLOG_COLUMNS, RUNLOG_FILE_NAME
from multipod.data_handling.packets.epoch_data_packet import EpochDataPacket
from multipod.data_handling.packets.logged_data_packet import LoggedDataPacket


class RunLogger:
    """
    A class that logs one row per training epoch to a CSV file. Rows are written and flushed as
    soon as an epoch ends, so an interrupted run keeps its log.

    It uses Python's csv module. Floats are written with a fixed number of decimals, so two
    identical runs produce byte-identical files.
    """

    __slots__ = ("_file", "_writer", "log_path")

    def __init__(self, log_dir: Path, file_name: str = RUNLOG_FILE_NAME) -> None:
        """
        Creates the log file, replacing an older one, and writes the header.
        :param log_dir: The directory where the log file will be.
        :param file_name: Name of the log file.
        """
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = log_dir / file_name
        self._file = self.log_path.open(mode="w", newline="")
        self._writer = csv.DictWriter(
            self._file, fieldnames=list(LoggedDataPacket.__annotations__), lineterminator="\n"
        )
        self._writer.writeheader()
        self._file.flush()

    def __enter__(self) -> "RunLogger":
        return self

    def __exit__(self, *_exc: object) -> None:
        self.stop()

    @property
    def is_running(self) -> bool:
        """
        Returns whether the log file is still open.
        """
        return not self._file.closed

    @staticmethod
    def _truncate_floats(data: dict[str, object]) -> LoggedDataPacket:
        """
        Truncates the decimal place of the floats in the dictionary to 8 decimal places.
        :param data: The dictionary to truncate.
        :return: The truncated dictionary.
        """
        return {  # type: ignore[return-value]
            key: f"{value:.8f}" if isinstance(value, float) else value
            for key, value in data.items()
        }

    @staticmethod
    def _prepare_log_dict(epoch_data_packet: EpochDataPacket) -> LoggedDataPacket:
        """
        Creates the row of an epoch.
        :param epoch_data_packet: The record of the epoch.
        :return: The dictionary representing what will be logged.
        """
        return RunLogger._truncate_floats(to_builtins(epoch_data_packet))

    def log(self, epoch_data_packet: EpochDataPacket) -> None:
        """
        Appends the record of an epoch to the CSV file.
        :param epoch_data_packet: The record to log.
        """
        self._writer.writerow(RunLogger._prepare_log_dict(epoch_data_packet))
        self._file.flush()

    def stop(self) -> None:
        """
        Closes the log file.
        """
        if not self._file.closed:
            self._file.close()


def read_runlog(path: Path) -> pd.DataFrame:
    """
    Reads a RunLog CSV back, one row per epoch.
    """
    frame = pd.read_csv(path)
    if tuple(frame.columns) != RUNLOG_COLUMNS:
        raise ValueError(f"{path} is not a RunLog: columns are {list(frame.columns)}")
    return frame
