"""Adam optimizer and the seeded training loop.

Training is one logical thread over minibatches: per step a fresh tape records
the batch loss, gradients flow back, and Adam (bias-corrected, one step-count
increment per batch) updates every tensor in declared order. Everything is
derived from (dataset, config.seed): the shuffle generator, dropout masks, and
initialization, so repeated runs are bitwise identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import InstanceBatch, RawInstance
from .errors import ShapeMismatchError, TrainingDivergedError
from .metrics import MetricsReport, evaluate
from .model import CtrModel, ModelConfig
from .numerics import GradTape
from .params import ParamStore


def adam_step(store: ParamStore, grads: dict[str, np.ndarray], config: ModelConfig) -> None:
    """One Adam update over every tensor in the store, in place."""
    store.step += 1
    t = store.step
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.adam_eps
    for path in store.paths():
        g = grads.get(path)
        theta = store.tensors[path]
        if g is None:
            g = np.zeros_like(theta)
        if g.shape != theta.shape:
            raise ShapeMismatchError(
                f"adam_step: gradient {g.shape} vs parameter {theta.shape} at {path}"
            )
        m = store.adam_m[path]
        v = store.adam_v[path]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + eps)


def split_train_heldout(instances: list[RawInstance]) -> tuple[list[RawInstance], list[RawInstance]]:
    """Deterministic split: the last 20% of instances by index are held out."""
    n_held = len(instances) // 5
    if n_held == 0:
        return list(instances), []
    return list(instances[:-n_held]), list(instances[-n_held:])


@dataclass
class TrainResult:
    store: ParamStore
    report: MetricsReport  # final held-out metrics plus per-epoch curves


def predict_scores(model: CtrModel, store: ParamStore, instances: list[RawInstance],
                   batch_size: int = 512) -> np.ndarray:
    """Evaluation-mode click probabilities for a list of instances."""
    scores = np.empty(len(instances))
    for lo in range(0, len(instances), batch_size):
        chunk = instances[lo:lo + batch_size]
        batch = InstanceBatch.from_instances(model.schema, chunk)
        scores[lo:lo + len(chunk)] = model.predict(batch, store).p_click
    return scores


def train(
    model: CtrModel,
    instances: list[RawInstance],
    config: ModelConfig | None = None,
    heldout: list[RawInstance] | None = None,
) -> TrainResult:
    """Seeded minibatch training; returns the trained store and per-epoch metrics.

    When `heldout` is None the last 20% of `instances` (by index) becomes the
    held-out split and the rest is trained on. Per-epoch curves record the mean
    training cross-entropy (without the L2 term) and held-out AUC/logloss.
    Aborts with the batch index on a non-finite loss.
    """
    config = model.config if config is None else config
    if not instances:
        raise ValueError("train: dataset must be nonempty")
    if heldout is None:
        train_set, heldout = split_train_heldout(instances)
    else:
        train_set = list(instances)
    if not train_set:
        raise ValueError("train: no training instances after the held-out split")

    store = model.init_params(config.seed)
    rng = np.random.default_rng(config.seed)
    n = len(train_set)
    batch_size = min(config.batch_size, n)

    loss_curve: list[float] = []
    val_auc: list[float] = []
    val_logloss: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        ce_sum = 0.0
        for batch_index, lo in enumerate(range(0, n, batch_size)):
            rows = order[lo:lo + batch_size]
            batch = InstanceBatch.from_instances(model.schema, [train_set[i] for i in rows])
            tape = GradTape()
            leaves = store.leaves(tape)
            out = model.loss_batch(batch, leaves, mode="train", rng=rng)
            loss_value = float(out.total.data)
            if not math.isfinite(loss_value):
                raise TrainingDivergedError(epoch, batch_index, loss_value)
            tape.backward(out.total)
            grads = {
                path: leaf.grad for path, leaf in leaves.items() if leaf.grad is not None
            }
            adam_step(store, grads, config)
            ce_sum += float(out.cross_entropy.data) * batch.size
        loss_curve.append(ce_sum / n)
        if heldout:
            scores = predict_scores(model, store, heldout)
            report = evaluate(scores, np.array([i.label for i in heldout]))
            val_auc.append(report.auc)
            val_logloss.append(report.logloss)

    if heldout:
        final = evaluate(
            predict_scores(model, store, heldout),
            np.array([i.label for i in heldout]),
        )
    else:
        scores = predict_scores(model, store, train_set)
        final = evaluate(scores, np.array([i.label for i in train_set]))
    final.loss_curve = tuple(loss_curve)
    final.val_auc_curve = tuple(val_auc)
    final.val_logloss_curve = tuple(val_logloss)
    return TrainResult(store=store, report=final)
