"""Module for the classification loss."""

import torch


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor | int) -> torch.Tensor:
    """
    Softmax cross-entropy, -log softmax(logits)[label], computed as logsumexp(z) - z_label so
    large logits cannot overflow. A batch gives the mean over its samples.
    :param logits: (6,) or (B, 6).
    :param labels: A stage index, or (B,) stage indices.
    """
    if not bool(torch.isfinite(logits).all()):
        raise ValueError("cross-entropy of non-finite logits")
    single = logits.ndim == 1
    if single:
        logits = logits.unsqueeze(0)
    labels = torch.as_tensor(labels, dtype=torch.long).reshape(-1)
    if labels.shape[0] != logits.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for {logits.shape[0]} logit vectors")
    picked = logits.gather(1, labels.unsqueeze(1)).squeeze(1)
    losses = torch.logsumexp(logits, dim=1) - picked
    return losses[0] if single else losses.mean()
