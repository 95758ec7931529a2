"""Module for describing the result of evaluating a model on a manifest"""

import msgspec


class EvalReport(msgspec.Struct, frozen=True):
    """
    Represents the accuracy of a model on one manifest. Rows of `confusion` are true stages and
    columns predicted stages, both in CS1..CS6 order.
    """

    accuracy: float
    """trace(confusion) / n."""
    per_class_recall: tuple[float, ...]
    """Row-normalized diagonal. A stage with no support gets 0."""
    per_class_precision: tuple[float, ...]
    """Column-normalized diagonal. A stage that is never predicted gets 0."""
    macro_f1: float
    confusion: tuple[tuple[int, ...], ...]
    n: int
    model_config: dict[str, object]
    seed: int
    epoch: int
