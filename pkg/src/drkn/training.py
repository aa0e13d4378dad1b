"""SGD fine-tuning with softmax cross-entropy and epoch-level metrics.

The loss is applied by default to the squashed outputs 1/2 + 1/2 tanh(s),
matching the model's decision form; set loss_on="raw" to train on the
scores directly.  Plain SGD, constant learning rate, no momentum.  The
history records a pre-training epoch-0 row so assembly-time quality is
always visible next to the fine-tuned curve.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .models import (DrknModel, RbfModel, drkn_apply_gradients,
                     drkn_raw_scores_batch, drkn_score_gradients,
                     rbf_apply_gradients, rbf_score_gradients,
                     rbf_scores_batch, squash)


@dataclass
class TrainConfig:
    """Mini-batch SGD settings; batch sizes outside 10..100 need opting in."""

    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0
    shuffle: bool = True
    loss_on: str = "squashed"
    allow_any_batch_size: bool = False

    def __post_init__(self):
        if not math.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ValueError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.allow_any_batch_size and not 10 <= self.batch_size <= 100:
            raise ValueError(
                f"batch_size {self.batch_size} outside 10..100; pass "
                "allow_any_batch_size=True to override")
        if self.loss_on not in ("squashed", "raw"):
            raise ValueError(f"loss_on must be 'squashed' or 'raw', got {self.loss_on!r}")

    def to_json(self):
        return json.dumps({
            "learning_rate": self.learning_rate, "batch_size": self.batch_size,
            "epochs": self.epochs, "seed": self.seed, "shuffle": self.shuffle,
            "loss_on": self.loss_on, "allow_any_batch_size": self.allow_any_batch_size,
        })

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"train config JSON: line {exc.lineno}: {exc.msg}") from exc
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"train config JSON: unknown fields {sorted(unknown)}")
        return cls(**doc)


@dataclass
class EpochRecord:
    epoch: int
    train_error: float
    test_error: float
    train_loss: float


@dataclass
class History:
    """Per-epoch error/loss curve plus the SVM reference line."""

    records: list = field(default_factory=list)
    svm_test_error: float = None

    @property
    def final(self):
        return self.records[-1]

    def epoch(self, k):
        for rec in self.records:
            if rec.epoch == k:
                return rec
        raise KeyError(f"no epoch {k} in history")


def softmax_xent(scores, label):
    """Cross-entropy of softmax(scores) against one label, with gradients.

    Computed with max subtraction; the returned gradient is
    softmax(scores) - onehot(label) and sums to zero.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not (0 <= label < scores.shape[-1]):
        raise ValueError(f"label {label} out of range for {scores.shape[-1]} classes")
    losses, grads = softmax_xent_batch(scores[None, :], np.array([label]))
    return float(losses[0]), grads[0]


def softmax_xent_batch(scores, labels):
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= scores.shape[1]):
        raise ValueError(f"labels out of range for {scores.shape[1]} classes")
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    probs = exp / total
    idx = np.arange(scores.shape[0])
    losses = np.log(total[:, 0]) - shifted[idx, labels]
    grads = probs
    grads[idx, labels] -= 1.0
    return losses, grads


def _model_ops(model):
    if isinstance(model, DrknModel):
        return drkn_raw_scores_batch, drkn_score_gradients, drkn_apply_gradients
    if isinstance(model, RbfModel):
        return rbf_scores_batch, rbf_score_gradients, rbf_apply_gradients
    raise TypeError(f"cannot train objects of type {type(model).__name__}")


def _loss_and_upstream(raw_scores, labels, loss_on):
    """Per-example losses and dLoss/dscore for the chosen loss input."""
    if loss_on == "squashed":
        t = np.tanh(raw_scores)
        losses, grads = softmax_xent_batch(0.5 + 0.5 * t, labels)
        upstream = grads * 0.5 * (1.0 - t * t)
    else:
        losses, grads = softmax_xent_batch(raw_scores, labels)
        upstream = grads
    return losses, upstream


def _evaluate(scores_fn, model, X, y, loss_on):
    if X.shape[0] == 0:
        return math.nan, math.nan
    raw = scores_fn(model, X)
    losses, _ = _loss_and_upstream(raw, y, loss_on)
    err = float(np.mean(np.argmax(raw, axis=1) != y))
    return err, float(np.mean(losses))


def train(model, data, cfg, svm_test_error=None):
    """Fine-tune a DRKN or RBF model in place; returns the epoch History.

    Each mini-batch averages the softmax cross-entropy over its examples,
    backpropagates through the shared fold network with gradient
    accumulation over all support-vector uses, and takes one vanilla SGD
    step.  Deterministic for a fixed config seed.
    """
    scores_fn, grads_fn, apply_fn = _model_ops(model)
    X, y = data.train_features, data.train_labels
    X_test, y_test = data.test_features, data.test_labels
    if X.shape[1] != model.dim:
        raise ValueError(f"data dimension {X.shape[1]} does not match model dim {model.dim}")
    if data.n_classes != model.n_classes:
        raise ValueError(f"data has {data.n_classes} classes, model has {model.n_classes}")
    rng = np.random.default_rng(cfg.seed)
    history = History(svm_test_error=svm_test_error)

    def record(epoch_idx):
        train_err, train_loss = _evaluate(scores_fn, model, X, y, cfg.loss_on)
        test_err, _ = _evaluate(scores_fn, model, X_test, y_test, cfg.loss_on)
        history.records.append(EpochRecord(epoch_idx, train_err, test_err, train_loss))

    record(0)
    n = X.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            rows = order[start:start + cfg.batch_size]
            raw = scores_fn(model, X[rows])
            losses, upstream = _loss_and_upstream(raw, y[rows], cfg.loss_on)
            mean_loss = float(np.mean(losses))
            if not math.isfinite(mean_loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {bi}; aborting")
            grads = grads_fn(model, X[rows], upstream / rows.size)
            apply_fn(model, grads, cfg.learning_rate)
        record(epoch)
    return history


# -- history CSV -----------------------------------------------------------

HISTORY_CSV_HEADER = "epoch,train_error,test_error,train_loss,svm_test_error"


def export_history_csv(history):
    out = io.StringIO()
    out.write(HISTORY_CSV_HEADER + "\n")
    ref = "" if history.svm_test_error is None else repr(float(history.svm_test_error))
    for rec in history.records:
        out.write(f"{rec.epoch},{rec.train_error!r},{rec.test_error!r},"
                  f"{rec.train_loss!r},{ref}\n")
    return out.getvalue()


def parse_history_csv(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != HISTORY_CSV_HEADER:
        raise ValueError(f"history CSV: expected header {HISTORY_CSV_HEADER!r}")
    history = History()
    for k, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != 5:
            raise ValueError(f"history CSV row {k}: expected 5 cells, got {len(cells)}")
        try:
            history.records.append(EpochRecord(
                int(cells[0]), float(cells[1]), float(cells[2]), float(cells[3])))
        except ValueError as exc:
            raise ValueError(f"history CSV row {k}: {exc}") from exc
        if cells[4]:
            history.svm_test_error = float(cells[4])
    return history


# -- full-model gradient check ---------------------------------------------


def full_grad_check(model, X, labels, epsilon=1e-6, loss_on="squashed"):
    """Central-difference check of the mean-loss gradient over every
    trainable parameter of a DRKN or RBF model, shared fold parameters
    included (perturbing one perturbs all of its uses).
    """
    scores_fn, grads_fn, _ = _model_ops(model)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)

    def objective():
        losses, _ = _loss_and_upstream(scores_fn(model, X), labels, loss_on)
        return float(np.mean(losses))

    raw = scores_fn(model, X)
    _, upstream = _loss_and_upstream(raw, labels, loss_on)
    grads = grads_fn(model, X, upstream / X.shape[0])

    checks = []
    if isinstance(model, DrknModel):
        net = model.fold_net
        for i in net.distinct_indices():
            checks.append((net.layers[i].weights, grads.fold_bundle.weight_grads[i]))
            checks.append((net.layers[i].biases, grads.fold_bundle.bias_grads[i]))
    for cls, dv, da in zip(model.classes, grads.sv_grads, grads.alpha_grads):
        checks.append((cls.support_vectors, dv))
        checks.append((cls.alphas, da))

    worst = 0.0

    def compare(analytic, fd):
        return abs(analytic - fd) / max(1.0, abs(analytic), abs(fd))

    for arr, g in checks:
        flat = arr.ravel()
        gflat = np.asarray(g, dtype=np.float64).ravel()
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + epsilon
            up = objective()
            flat[j] = orig - epsilon
            dn = objective()
            flat[j] = orig
            worst = max(worst, compare(gflat[j], (up - dn) / (2.0 * epsilon)))
    for cls, db in zip(model.classes, grads.bias_grads):
        orig = cls.bias
        cls.bias = orig + epsilon
        up = objective()
        cls.bias = orig - epsilon
        dn = objective()
        cls.bias = orig
        worst = max(worst, compare(db, (up - dn) / (2.0 * epsilon)))
    if isinstance(model, RbfModel):
        orig = model.gamma
        model.gamma = orig + epsilon
        up = objective()
        model.gamma = orig - epsilon
        dn = objective()
        model.gamma = orig
        worst = max(worst, compare(grads.gamma_grad, (up - dn) / (2.0 * epsilon)))
    return worst
