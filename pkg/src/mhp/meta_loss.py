"""Winner-takes-all meta-loss over a set of predicted hypotheses.

Per sample, the hypothesis with the lowest base loss receives weight
``1 - epsilon`` and every other active hypothesis shares the remaining
``epsilon`` equally, so losing hypotheses keep receiving a small gradient
instead of starving. Whole hypotheses can additionally drop out of a step
with a low probability, which randomizes the winner selection enough to
revive hypotheses whose cells contain no training labels yet.

Weights over active hypotheses always sum to 1. With a single hypothesis
the meta-loss reduces to the base loss exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import L2, LossKind, loss_grads, loss_values


@dataclass(frozen=True)
class MetaLossConfig:
    num_hypotheses: int
    epsilon: float = 0.05
    dropout_prob: float = 0.01
    base_loss: LossKind = L2

    def __post_init__(self) -> None:
        if self.num_hypotheses < 1:
            raise ValueError("num_hypotheses must be >= 1")
        if self.num_hypotheses >= 2 and not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError("dropout_prob must lie in [0, 1)")


@dataclass(frozen=True)
class AssignmentResult:
    best_index: int
    weights: np.ndarray              # (M,), active weights sum to 1
    per_hypothesis_losses: np.ndarray  # (M,), computed before dropout
    dropped_mask: np.ndarray         # (M,) bool


def _broadcast_target(kind: LossKind, hypotheses: np.ndarray, target):
    """Target shaped so loss_values(kind, hypotheses, target) -> (M,)."""
    if kind.name == "cross_entropy":
        return np.asarray(target)
    t = np.asarray(target, dtype=np.float64)
    if t.shape != hypotheses.shape[-1:]:
        raise ValueError(f"target shape {t.shape} != output dim ({hypotheses.shape[-1]},)")
    return t


def draw_dropout_mask(config: MetaLossConfig, rng: np.random.Generator) -> np.ndarray:
    """Independent per-hypothesis dropout; an all-dropped draw drops none."""
    mask = rng.random(config.num_hypotheses) < config.dropout_prob
    if mask.all():
        mask[:] = False
    return mask


def assign(config: MetaLossConfig, hypotheses, target,
           rng: np.random.Generator | None = None,
           dropped_mask=None) -> AssignmentResult:
    """Per-hypothesis losses, dropout mask, winner and relaxed weights.

    The winner is the active hypothesis with the lowest base loss (lowest
    index on ties). Pass ``dropped_mask`` to fix the dropout draw; otherwise
    it is sampled from ``rng`` when ``dropout_prob > 0``.
    """
    h = np.asarray(hypotheses, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != config.num_hypotheses:
        raise ValueError(f"expected ({config.num_hypotheses}, d) hypotheses, got {h.shape}")
    if not np.isfinite(h).all():
        raise ValueError("non-finite hypotheses")
    losses = loss_values(config.base_loss, h, _broadcast_target(config.base_loss, h, target))

    if dropped_mask is not None:
        mask = np.asarray(dropped_mask, dtype=bool).copy()
        if mask.shape != (config.num_hypotheses,):
            raise ValueError("dropout mask shape mismatch")
        if mask.all():
            mask[:] = False
    elif config.dropout_prob > 0.0:
        if rng is None:
            raise ValueError("rng required when dropout_prob > 0")
        mask = draw_dropout_mask(config, rng)
    else:
        mask = np.zeros(config.num_hypotheses, dtype=bool)

    weights, best = _weights_from_losses(losses, mask, config.epsilon)
    return AssignmentResult(best, weights, losses, mask)


def _weights_from_losses(losses: np.ndarray, dropped: np.ndarray, epsilon: float):
    m = losses.shape[0]
    masked = np.where(dropped, np.inf, losses)
    best = int(np.argmin(masked))
    active = int(m - dropped.sum())
    weights = np.zeros(m)
    if m == 1 or active == 1:
        weights[best] = 1.0
    else:
        weights[~dropped] = epsilon / (active - 1)
        weights[best] = 1.0 - epsilon
    return weights, best


def meta_loss(config: MetaLossConfig, hypotheses, target,
              assignment: AssignmentResult) -> float:
    """Weighted sum of per-hypothesis base losses under a fixed assignment."""
    h = np.asarray(hypotheses, dtype=np.float64)
    losses = loss_values(config.base_loss, h, _broadcast_target(config.base_loss, h, target))
    return float(assignment.weights @ losses)


def meta_loss_upstream_grads(config: MetaLossConfig, hypotheses, target,
                             assignment: AssignmentResult) -> np.ndarray:
    """Per-hypothesis gradients weights[j] * dL/df_j, shape (M, d).

    Dropped hypotheses get an exactly zero gradient vector.
    """
    h = np.asarray(hypotheses, dtype=np.float64)
    g = loss_grads(config.base_loss, h, _broadcast_target(config.base_loss, h, target))
    return assignment.weights[:, None] * g


def assign_batch(config: MetaLossConfig, hypotheses, targets,
                 rng: np.random.Generator | None = None, dropped_masks=None):
    """Vectorized assignment for a batch.

    ``hypotheses`` is (n, M, d); regression targets are (n, d), class targets
    (n,). Returns (weights (n, M), losses (n, M), best (n,), masks (n, M)).
    Dropout draws consume ``rng`` in the same row-major order as n successive
    single-sample draws, so the batch path matches the sequential one stream
    for stream.
    """
    h = np.asarray(hypotheses, dtype=np.float64)
    n, m = h.shape[0], h.shape[1]
    if m != config.num_hypotheses:
        raise ValueError(f"expected M={config.num_hypotheses} hypotheses, got {m}")
    if config.base_loss.name == "cross_entropy":
        t = np.asarray(targets).reshape(n, 1)
    else:
        t = np.asarray(targets, dtype=np.float64).reshape(n, 1, h.shape[2])
    losses = loss_values(config.base_loss, h, t)

    if dropped_masks is not None:
        masks = np.asarray(dropped_masks, dtype=bool).copy()
    elif config.dropout_prob > 0.0:
        if rng is None:
            raise ValueError("rng required when dropout_prob > 0")
        masks = rng.random((n, m)) < config.dropout_prob
    else:
        masks = np.zeros((n, m), dtype=bool)
    masks[masks.all(axis=1)] = False

    masked = np.where(masks, np.inf, losses)
    best = masked.argmin(axis=1)
    active = m - masks.sum(axis=1)
    if m == 1:
        weights = np.ones((n, 1))
    else:
        share = config.epsilon / np.maximum(active - 1, 1)
        weights = np.where(masks, 0.0, share[:, None])
        rows = np.arange(n)
        weights[rows, best] = 1.0 - config.epsilon
        weights[active == 1] = 0.0
        weights[rows[active == 1], best[active == 1]] = 1.0
    return weights, losses, best, masks
