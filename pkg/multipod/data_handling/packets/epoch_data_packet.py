"""Module for describing the data packet created at the end of every training epoch"""

import msgspec


class EpochDataPacket(msgspec.Struct, frozen=True):
    """
    Represents one row of the RunLog: what an epoch of training achieved.
    """

    epoch: int
    train_loss: float
    """Mean cross-entropy over the training samples of the epoch."""
    train_acc: float
    """Fraction of training samples classified correctly while they were being trained on."""
    test_acc: float
    """Fraction of the test manifest classified correctly after the epoch."""
    lr: float
    """Learning rate used for every step of the epoch."""
