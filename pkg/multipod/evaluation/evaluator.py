"""Module for classifying records with a trained network and scoring the predictions."""

import msgspec
import numpy as np
import numpy.typing as npt
import torch
from torch.utils.data import DataLoader

from multipod.constants import NUM_STAGES, Mode, Stage
from multipod.data_handling.packets.eval_report_packet import EvalReport
from multipod.data_handling.packets.subject_record import Manifest, SubjectRecord
from multipod.data_handling.patch_dataset import PatchDataset
from multipod.errors import ManifestError
from multipod.model.multipod_net import MultiPodNet, forward, predict_stage
from multipod.pipeline.image_ops import prepare_record
from multipod.pipeline.patches import extract_patches

EVAL_BATCH_SIZE = 64


def predict(model: MultiPodNet, record: SubjectRecord) -> Stage:
    """
    The stage of one record: the largest eval-mode logit over its unaugmented patches, ties going
    to the lower stage.
    """
    patch_set = extract_patches(prepare_record(record))
    return predict_stage(forward(model, patch_set, record.age_years, Mode.EVAL))


@torch.no_grad()
def predict_logits(
    model: MultiPodNet, dataset: PatchDataset, batch_size: int = EVAL_BATCH_SIZE, workers: int = 0
) -> npt.NDArray[np.float32]:
    """
    Eval-mode logits of every sample of a dataset, in dataset order.
    :return: (N, 6) logits.
    """
    was_training = model.training
    model.eval()
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=workers)
    try:
        logits = [model(patches, ages).numpy() for patches, ages, _ in loader]
    finally:
        model.train(was_training)
    return np.concatenate(logits) if logits else np.empty((0, NUM_STAGES), dtype=np.float32)


def predict_dataset(
    model: MultiPodNet, dataset: PatchDataset, batch_size: int = EVAL_BATCH_SIZE, workers: int = 0
) -> npt.NDArray[np.int64]:
    """
    Predicted stage indices of every sample of a dataset. np.argmax picks the first maximum, so
    ties go to the lower stage.
    """
    return np.argmax(predict_logits(model, dataset, batch_size, workers), axis=1)


def confusion_matrix(
    true_indices: npt.ArrayLike, predicted_indices: npt.ArrayLike
) -> npt.NDArray[np.int64]:
    """
    6 x 6 counts, rows are true stages and columns predicted stages.
    """
    confusion = np.zeros((NUM_STAGES, NUM_STAGES), dtype=np.int64)
    np.add.at(confusion, (np.asarray(true_indices), np.asarray(predicted_indices)), 1)
    return confusion


def _safe_ratio(numerator: npt.NDArray, denominator: npt.NDArray) -> npt.NDArray[np.float64]:
    out = np.zeros(numerator.shape, dtype=np.float64)
    np.divide(numerator, denominator, out=out, where=denominator > 0)
    return out


def report_from_confusion(
    confusion: npt.NDArray[np.int64],
    model_config: dict[str, object] | None = None,
    seed: int = 0,
    epoch: int = 0,
) -> EvalReport:
    """
    Derives every metric of an EvalReport from a confusion matrix.
    """
    n = int(confusion.sum())
    diagonal = np.diag(confusion).astype(np.float64)
    recall = _safe_ratio(diagonal, confusion.sum(axis=1))
    precision = _safe_ratio(diagonal, confusion.sum(axis=0))
    f1 = _safe_ratio(2 * precision * recall, precision + recall)
    return EvalReport(
        accuracy=float(diagonal.sum() / n) if n else 0.0,
        per_class_recall=tuple(float(value) for value in recall),
        per_class_precision=tuple(float(value) for value in precision),
        macro_f1=float(f1.mean()),
        confusion=tuple(tuple(int(count) for count in row) for row in confusion),
        n=n,
        model_config=model_config if model_config is not None else {},
        seed=seed,
        epoch=epoch,
    )


def evaluate(
    model: MultiPodNet, manifest: Manifest, batch_size: int = EVAL_BATCH_SIZE, workers: int = 0
) -> EvalReport:
    """
    Classifies every record of a manifest and scores the predictions. A record whose image
    cannot be read aborts the evaluation with its path.
    """
    if not len(manifest):
        raise ManifestError("cannot evaluate an empty manifest")
    dataset = PatchDataset(manifest, Mode.EVAL)
    predictions = predict_dataset(model, dataset, batch_size, workers)
    confusion = confusion_matrix(dataset.labels.numpy(), predictions)
    return report_from_confusion(
        confusion,
        model_config=msgspec.to_builtins(model.cfg),
        seed=model.cfg.seed,
        epoch=model.epoch,
    )
