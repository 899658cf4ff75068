"""Evaluation metrics: oracle-min loss, hypothesis spread, image sharpness
and multi-label coverage scores.
"""

from __future__ import annotations

import numpy as np

from .losses import LossKind, loss_values
from .network import MlpModel, forward_batch


def _per_hypothesis_losses(model: MlpModel, X, Y, kind: LossKind) -> np.ndarray:
    hyps = forward_batch(model, X)
    if kind.name == "cross_entropy":
        t = np.asarray(Y).reshape(len(hyps), 1)
    else:
        t = np.asarray(Y, dtype=np.float64).reshape(len(hyps), 1, model.output_dim)
    return loss_values(kind, hyps, t)


def oracle_min_loss(model: MlpModel, X, Y, kind: LossKind) -> float:
    """Mean over samples of the best hypothesis's base loss."""
    if len(np.asarray(X)) == 0:
        raise ValueError("empty dataset")
    return float(_per_hypothesis_losses(model, X, Y, kind).min(axis=1).mean())


def oracle_min_loss_nested(model: MlpModel, X, Y, kind: LossKind) -> np.ndarray:
    """Oracle-min loss restricted to the first k hypotheses, for k = 1..M.

    Non-increasing in k by construction (the min runs over a growing set).
    """
    losses = _per_hypothesis_losses(model, X, Y, kind)
    running = np.minimum.accumulate(losses, axis=1)
    return running.mean(axis=0)


def hypothesis_variance(hypotheses) -> float:
    """Mean Euclidean distance of each hypothesis to the hypothesis mean."""
    h = np.asarray(hypotheses, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] < 2:
        raise ValueError("hypothesis variance needs at least 2 hypotheses")
    center = h.mean(axis=0)
    return float(np.linalg.norm(h - center, axis=1).mean())


def per_dimension_variance(hypotheses) -> np.ndarray:
    """Variance across hypotheses, per output dimension.

    Reshaped to the frame geometry this is the per-pixel variance map.
    """
    h = np.asarray(hypotheses, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] < 2:
        raise ValueError("variance needs at least 2 hypotheses")
    return h.var(axis=0)


def dataset_hypothesis_variance(model: MlpModel, X) -> tuple[float, np.ndarray]:
    """Mean hypothesis spread over a dataset plus the mean per-dim variance."""
    hyps = forward_batch(model, X).reshape(len(X), model.num_hypotheses, -1)
    if model.num_hypotheses < 2:
        raise ValueError("hypothesis variance needs at least 2 hypotheses")
    center = hyps.mean(axis=1, keepdims=True)
    spread = np.linalg.norm(hyps - center, axis=2).mean()
    return float(spread), hyps.var(axis=1).mean(axis=0)


def sharpness(hypotheses, width: int, height: int, channels: int = 1) -> float:
    """Mean squared forward-difference gradient magnitude over all outputs.

    Differences run toward larger row/column indices and are zero at the far
    boundary; the sum is averaged over channels, pixels and hypotheses.
    Constant images score 0; scaling intensities by a scales the value a^2.
    """
    h = np.asarray(hypotheses, dtype=np.float64)
    if h.ndim == 1:
        h = h[None, :]
    m = h.shape[0]
    if h.shape[1:] != (height * width * channels,):
        raise ValueError(
            f"cannot reshape outputs of size {h.shape[1:]} to {height}x{width}x{channels}")
    imgs = h.reshape(m, height, width, channels)
    gx = np.zeros_like(imgs)
    gy = np.zeros_like(imgs)
    gx[:, :, :-1, :] = imgs[:, :, 1:, :] - imgs[:, :, :-1, :]
    gy[:, :-1, :, :] = imgs[:, 1:, :, :] - imgs[:, :-1, :, :]
    total = float((gx * gx + gy * gy).sum())
    return total / (channels * width * height * m)


def dataset_sharpness(model: MlpModel, X, width: int, height: int,
                      channels: int = 1) -> float:
    """Mean sharpness of the model's hypothesis sets over a dataset."""
    hyps = forward_batch(model, X)
    vals = [sharpness(hyps[i], width, height, channels) for i in range(len(hyps))]
    return float(np.mean(vals))


def multilabel_scores(model: MlpModel, features, label_sets) -> tuple[float, float]:
    """Coverage of true label sets by the per-hypothesis argmax classes.

    The predicted set per input is the deduplicated argmax class of each
    hypothesis. Returns (recall_at_M, precision), both averaged over inputs:
    recall is the fraction of true labels covered, precision the fraction of
    predicted labels that are true.
    """
    X = np.asarray(features, dtype=np.float64)
    if len(X) != len(label_sets):
        raise ValueError("one label set per input required")
    hyps = forward_batch(model, X)
    preds = hyps.argmax(axis=2)
    recalls, precisions = [], []
    for i, true_set in enumerate(label_sets):
        true = set(int(c) for c in true_set)
        if not true:
            raise ValueError("empty label set")
        predicted = set(int(c) for c in preds[i])
        hit = len(true & predicted)
        recalls.append(hit / len(true))
        precisions.append(hit / len(predicted))
    return float(np.mean(recalls)), float(np.mean(precisions))
