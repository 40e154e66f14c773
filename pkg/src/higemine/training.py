"""Losses, optimizer and the full-batch training loops."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import gcn
from .errors import ConfigError, NumericError, ShapeError
from .metrics import f1_scores

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-7


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 20

    def __post_init__(self):
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ConfigError("learning_rate must be a finite non-negative number")
        if self.epochs <= 0:
            raise ConfigError("epochs must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainReport:
    head: str
    train_loss: list[float] = field(default_factory=list)
    val_f1_macro: list[float] = field(default_factory=list)
    best_epoch: int = -1
    epochs_run: int = 0
    checkpoint: str | None = None
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "head": self.head,
            "train_loss": self.train_loss,
            "val_f1_macro": self.val_f1_macro,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "checkpoint": self.checkpoint,
            "wall_time": self.wall_time,
        }


# -- losses ------------------------------------------------------------------


def bce_loss(probabilities, targets) -> float:
    """Mean binary cross-entropy on probabilities clamped to [1e-7, 1 - 1e-7]."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeError(f"bce_loss: {p.shape} vs {y.shape}")
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def bce_logit_grad(logits, targets) -> np.ndarray:
    """d bce_loss(sigmoid(x), y) / dx; zero where the clamp is active."""
    x = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    p = gcn.sigmoid(x)
    live = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    return np.where(live, (p - y) / x.size, 0.0)


def bce_with_logits(logits, targets, weights=None) -> float:
    """Weighted mean of max(x, 0) - x*y + log(1 + exp(-|x|)).

    ``weights`` broadcasts against ``logits``; cells of weight 0 are masked out
    entirely, so their targets never reach the result.
    """
    x = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"bce_with_logits: {x.shape} vs {y.shape}")
    w = np.broadcast_to(np.ones(1) if weights is None else np.asarray(weights, dtype=np.float64), x.shape)
    total = w.sum()
    if total == 0:
        return 0.0
    per = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    return float(np.where(w > 0, w * per, 0.0).sum() / total)


def bce_with_logits_grad(logits, targets, weights=None) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    w = np.broadcast_to(np.ones(1) if weights is None else np.asarray(weights, dtype=np.float64), x.shape)
    total = w.sum()
    if total == 0:
        return np.zeros_like(x)
    return np.where(w > 0, w * (gcn.sigmoid(x) - y) / total, 0.0)


# -- optimizer ---------------------------------------------------------------


@dataclass
class OptimizerState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(params: dict, grads: dict, state: OptimizerState, cfg: TrainConfig):
    """Update ``params`` in place (SGD or bias-corrected Adam); returns (params, state)."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
        if params[name].shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} for {name} {params[name].shape}")
    state.step += 1
    lr = cfg.learning_rate
    if cfg.optimizer == "sgd":
        for name, g in grads.items():
            params[name] -= lr * g
        return params, state
    t = state.step
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    for name, g in grads.items():
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        state.m[name], state.v[name] = m, v
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return params, state


# -- loops -------------------------------------------------------------------


def level1_loss_and_grads(model, inputs, labels, lam, rows):
    """Loss on ``rows`` and gradients for every Level-1 parameter."""
    trace = gcn.record_level1(model, inputs, lam)
    logits = trace.value[:, 0]
    loss = bce_loss(gcn.sigmoid(logits[rows]), labels[rows])
    upstream = np.zeros_like(trace.value)
    upstream[rows, 0] = bce_logit_grad(logits[rows], labels[rows])
    return loss, gcn.backward(trace, upstream)


def level2_loss_and_grads(model, inputs, label_adj, targets, weights, lam, rows):
    """Gated multi-label loss on ``rows``; ``weights`` is one gate value per document."""
    trace = gcn.record_level2(model, inputs, label_adj, lam)
    logits = trace.value
    w = np.asarray(weights, dtype=np.float64)[rows, None]
    loss = bce_with_logits(logits[rows], targets[rows], w)
    upstream = np.zeros_like(logits)
    upstream[rows] = bce_with_logits_grad(logits[rows], targets[rows], w)
    return loss, gcn.backward(trace, upstream)


def _fit(head, model, loss_and_grads, evaluate, cfg: TrainConfig):
    params = gcn.named_parameters(model)
    state = OptimizerState()
    report = TrainReport(head)
    best = None
    best_score = -math.inf
    stale = 0
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        loss, grads = loss_and_grads(model)
        if not math.isfinite(loss):
            raise NumericError(f"{head}: loss became {loss} at epoch {epoch}")
        optimizer_step(params, grads, state, cfg)
        report.train_loss.append(loss)
        report.epochs_run = epoch + 1
        if evaluate is None:
            continue
        score = evaluate(model)
        report.val_f1_macro.append(score)
        if score > best_score:
            best_score, best, stale = score, gcn.copy_model(model), 0
            report.best_epoch = epoch
        else:
            stale += 1
            if cfg.patience > 0 and stale >= cfg.patience:
                log.info("%s: early stop at epoch %d (best %d)", head, epoch, report.best_epoch)
                break
    if best is not None and cfg.patience > 0:
        model = best
    else:
        report.best_epoch = report.epochs_run - 1
    report.wall_time = time.perf_counter() - start
    return model, report


def train_level1(inputs, labels, cfg: TrainConfig, train_rows, val_rows=None, lam=0.3, model_cfg=None, model=None):
    """Fit a Level-1 model on ``train_rows`` of ``labels`` (0 fiction, 1 nonfiction).

    With ``val_rows`` and a positive patience, validation macro-F1 drives early
    stopping and picks the returned weights; otherwise the final weights are
    returned.
    """
    labels = np.asarray(labels, dtype=np.float64)
    train_rows = np.asarray(train_rows, dtype=int)
    if model is None:
        model = gcn.init_level1(inputs.blurb_features.shape[1], model_cfg or gcn.ModelConfig(), cfg.seed)

    def step(m):
        return level1_loss_and_grads(m, inputs, labels, lam, train_rows)

    evaluate = None
    if val_rows is not None and len(val_rows):
        val_rows = np.asarray(val_rows, dtype=int)

        def evaluate(m):
            pred = (gcn.level1_forward(m, inputs, lam)[val_rows] >= 0).astype(int)
            return f1_scores(pred[:, None], labels[val_rows, None])[1]

    return _fit("level1", model, step, evaluate, cfg)


def train_level2(
    head: str,
    inputs,
    label_adj,
    model,
    targets,
    gate,
    cfg: TrainConfig,
    train_rows,
    val_rows=None,
    lam=0.7,
    decision_threshold: float = 0.5,
):
    """Fit one Level-2 head.

    ``gate`` holds 1 for documents whose true Level-1 label matches this
    head's branch and 0 otherwise; gated-off documents add nothing to the loss
    or to any gradient. Validation only looks at gated-on documents.
    """
    targets = np.asarray(targets, dtype=np.float64)
    gate = np.asarray(gate, dtype=np.float64)
    train_rows = np.asarray(train_rows, dtype=int)

    def step(m):
        return level2_loss_and_grads(m, inputs, label_adj, targets, gate, lam, train_rows)

    evaluate = None
    if val_rows is not None:
        val_rows = np.asarray([r for r in val_rows if gate[r] > 0], dtype=int)
        if len(val_rows):

            def evaluate(m):
                probs = gcn.level2_forward(m, inputs, label_adj, lam)[val_rows]
                return f1_scores(decide(probs, decision_threshold), targets[val_rows])[1]

    return _fit(head, model, step, evaluate, cfg)


def decide(probs, threshold: float = 0.5) -> np.ndarray:
    """Threshold each row; a row with nothing above threshold keeps its argmax."""
    probs = np.atleast_2d(probs)
    out = (probs >= threshold).astype(int)
    empty = out.sum(axis=1) == 0
    out[empty, np.argmax(probs[empty], axis=1)] = 1
    return out
