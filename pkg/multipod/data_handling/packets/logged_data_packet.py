"""Module for describing the row the RunLog logger writes"""

from typing import TypedDict


class LoggedDataPacket(TypedDict):
    """
    Represents a row of the RunLog CSV. The field order is the column order of the file, floats
    are already formatted as strings.
    """

    epoch: int
    train_loss: str
    train_acc: str
    test_acc: str
    lr: str
