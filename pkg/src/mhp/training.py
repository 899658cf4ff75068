"""Training loop: forward, winner-takes-all weighting, backward, update.

Each step forwards a batch, weights the per-hypothesis loss gradients by the
relaxed assignment, backpropagates their batch mean and applies one
optimizer update. Dropout masks are resampled per sample. Runs are
deterministic given the schedule seed: the data stream and the dropout
stream are derived from it as independent child generators.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .losses import loss_grads
from .meta_loss import MetaLossConfig, assign_batch
from .network import MlpModel, OptimizerState, TrainingDivergedError, backward_batch, forward_batch, step


@dataclass
class TrainSchedule:
    epochs: int
    batch_size: int
    seed: int
    samples_per_epoch: int = 10_000  # only used with callable samplers

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.samples_per_epoch < 1:
            raise ValueError("epochs, batch_size and samples_per_epoch must be positive")


@dataclass
class EpochMetrics:
    epoch: int
    mean_meta_loss: float
    oracle_min_loss: float
    wall_ms: float


def _epoch_data(data, rng: np.random.Generator, schedule: TrainSchedule):
    if callable(data):
        X, Y = data(rng, schedule.samples_per_epoch)
    else:
        X, Y = data
        order = rng.permutation(len(X))
        X, Y = X[order], Y[order]
    if len(X) == 0:
        raise ValueError("empty dataset")
    return np.asarray(X, dtype=np.float64), np.asarray(Y)


def train(model: MlpModel, data, config: MetaLossConfig,
          optimizer: OptimizerState, schedule: TrainSchedule) -> list[EpochMetrics]:
    """Train ``model`` in place; returns one metrics record per epoch.

    ``data`` is either a fixed ``(X, Y)`` pair, reshuffled every epoch, or a
    callable ``sampler(rng, n)`` drawing a fresh epoch of n samples. Aborts
    with TrainingDivergedError (carrying epoch and batch index) as soon as a
    non-finite loss or gradient appears.
    """
    if config.num_hypotheses != model.num_hypotheses:
        raise ValueError("meta-loss config and model disagree on the hypothesis count")
    root = np.random.SeedSequence(schedule.seed)
    data_ss, dropout_ss = root.spawn(2)
    data_rng = np.random.default_rng(data_ss)
    dropout_rng = np.random.default_rng(dropout_ss)

    history: list[EpochMetrics] = []
    for epoch in range(schedule.epochs):
        t0 = time.perf_counter()
        X, Y = _epoch_data(data, data_rng, schedule)
        n = len(X)
        meta_sum = 0.0
        oracle_sum = 0.0
        for b, lo in enumerate(range(0, n, schedule.batch_size)):
            xb = X[lo:lo + schedule.batch_size]
            yb = Y[lo:lo + schedule.batch_size]
            hyps = forward_batch(model, xb)
            # overflow here is how divergence first shows up; it is turned
            # into a typed error right below
            with np.errstate(over="ignore", invalid="ignore"):
                weights, losses, _, _ = assign_batch(config, hyps, yb, rng=dropout_rng)
            if not np.isfinite(losses).all():
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {b}",
                    epoch=epoch, batch_index=b)
            meta_sum += float((weights * losses).sum())
            oracle_sum += float(losses.min(axis=1).sum())
            if config.base_loss.name == "cross_entropy":
                tb = yb.reshape(len(xb), 1)
            else:
                tb = yb.reshape(len(xb), 1, model.output_dim)
            upstream = weights[:, :, None] * loss_grads(config.base_loss, hyps, tb)
            upstream /= len(xb)
            grads = backward_batch(model, xb, upstream)
            try:
                step(optimizer, model, grads)
            except TrainingDivergedError as err:
                err.epoch = epoch
                err.batch_index = b
                raise
        history.append(EpochMetrics(
            epoch=epoch,
            mean_meta_loss=meta_sum / n,
            oracle_min_loss=oracle_sum / n,
            wall_ms=(time.perf_counter() - t0) * 1e3,
        ))
    return history
