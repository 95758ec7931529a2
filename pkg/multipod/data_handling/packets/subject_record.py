"""Module for describing one labeled radiograph and an ordered collection of them."""

import msgspec

from multipod.constants import Sex, Stage


class Roi(msgspec.Struct, frozen=True):
    """
    A rectangle, in source pixels, around the cervical spine of a radiograph.
    """

    x: int
    """Column of the left edge."""
    y: int
    """Row of the top edge."""
    width: int
    height: int


class SubjectRecord(msgspec.Struct, frozen=True):
    """
    This class represents one row of a manifest: where the radiograph is and what we know about
    the subject.
    """

    image_path: str
    """Absolute path of the image once loaded from a manifest."""
    sex: Sex
    age_years: float
    stage: Stage
    roi: Roi | None = None
    """None when the image is already cropped to the spine region."""


class Manifest(msgspec.Struct, frozen=True):
    """
    An ordered list of labeled radiographs. No two records share an image path.
    """

    records: tuple[SubjectRecord, ...]
    source_tag: str = ""
    """Free text describing where the records came from (a file name, a filter, a split)."""

    def __len__(self) -> int:
        return len(self.records)
