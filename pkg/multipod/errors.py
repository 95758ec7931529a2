"""Exceptions raised by the multipod package."""

from pathlib import Path


class MultiPodError(Exception):
    """Base class of every error the package raises on bad data or files."""


class ManifestError(MultiPodError):
    """
    A manifest file could not be parsed. `row` is the 1-based data row (the header is row 0) and
    `column` the offending column, when known.
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None) -> None:
        self.row = row
        self.column = column
        location = ""
        if row is not None:
            location = f"row {row}"
            if column is not None:
                location += f", column '{column}'"
            location += ": "
        super().__init__(location + message)


class ImageError(MultiPodError):
    """An image could not be read, or does not have the expected geometry."""

    def __init__(self, message: str, path: Path | str | None = None) -> None:
        self.path = path
        super().__init__(f"{path}: {message}" if path is not None else message)


class ShapeError(MultiPodError):
    """An array or tensor does not have the shape an operation requires."""


class ConfigError(MultiPodError):
    """A configuration is internally inconsistent."""


class CheckpointError(MultiPodError):
    """A checkpoint file cannot be turned back into a model."""


class CheckpointVersionError(CheckpointError):
    """The checkpoint was written with a different format version."""


class CheckpointCorruptError(CheckpointError):
    """The checkpoint is truncated or its contents do not parse."""


class CheckpointConfigMismatchError(CheckpointError):
    """The checkpoint holds a different model than the one requested."""
