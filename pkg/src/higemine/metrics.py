"""Level-1 and multi-label Level-2 metrics.

Conventions:
  * macro F1 scores a label with no positives in either matrix as 0;
  * per-label balanced accuracy falls back to specificity (sensitivity) when
    the label has no true positives (negatives), and a label with neither is
    skipped;
  * micro balanced accuracy is computed from TP/TN/FP/FN pooled over all cells.

Every metric is a ratio of counts, so all of them are computed in exact
rational arithmetic and rounded to float once at the end. Results therefore
do not depend on summation order.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import ShapeError

REPORT_SCHEMA_VERSION = 1

CONVENTIONS = {
    "macro_f1_zero_support": 0.0,
    "balanced_accuracy_micro": "pooled-counts",
    "balanced_accuracy_missing_class": "other-rate-only",
    "level1_positive_class": "nonfiction",
}


def _pair(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ShapeError(f"pred {pred.shape} vs truth {truth.shape}")
    if pred.ndim == 1:
        pred, truth = pred[:, None], truth[:, None]
    return pred.astype(bool), truth.astype(bool)


def confusion(pred, truth):
    """Per-label (tp, fp, fn, tn) count vectors."""
    p, t = _pair(pred, truth)
    tp = (p & t).sum(axis=0)
    fp = (p & ~t).sum(axis=0)
    fn = (~p & t).sum(axis=0)
    tn = (~p & ~t).sum(axis=0)
    return tp, fp, fn, tn


def _f1(tp, fp, fn) -> Fraction:
    denom = 2 * tp + fp + fn
    return Fraction(2 * tp, denom) if denom else Fraction(0)


def _mean(values) -> float:
    return float(sum(values, Fraction(0)) / len(values)) if values else 0.0


def f1_scores(pred, truth) -> tuple[float, float]:
    tp, fp, fn, _ = confusion(pred, truth)
    micro = _f1(int(tp.sum()), int(fp.sum()), int(fn.sum()))
    macro = _mean([_f1(int(a), int(b), int(c)) for a, b, c in zip(tp, fp, fn)])
    return float(micro), macro


def _ba(tp, fp, fn, tn) -> Fraction | None:
    pos, neg = tp + fn, tn + fp
    if pos == 0 and neg == 0:
        return None
    if pos == 0:
        return Fraction(tn, neg)
    if neg == 0:
        return Fraction(tp, pos)
    return (Fraction(tp, pos) + Fraction(tn, neg)) / 2


def balanced_accuracy(pred, truth) -> tuple[float, float]:
    tp, fp, fn, tn = confusion(pred, truth)
    micro = _ba(int(tp.sum()), int(fp.sum()), int(fn.sum()), int(tn.sum()))
    per_label = [_ba(int(a), int(b), int(c), int(d)) for a, b, c, d in zip(tp, fp, fn, tn)]
    macro = _mean([x for x in per_label if x is not None])
    return float(micro if micro is not None else 0), macro


def hamming_loss(pred, truth) -> float:
    p, t = _pair(pred, truth)
    if p.size == 0:
        return 0.0
    return float(Fraction(int((p != t).sum()), p.size))


def level1_metrics(pred, truth) -> dict:
    p, t = _pair(pred, truth)
    tp, fp, fn, _ = confusion(p, t)
    return {
        "f1": float(_f1(int(tp.sum()), int(fp.sum()), int(fn.sum()))),
        "accuracy": float(Fraction(int((p == t).sum()), p.size)) if p.size else 0.0,
        "n": int(p.shape[0]),
    }


def multilabel_metrics(pred, truth) -> dict:
    f1_micro, f1_macro = f1_scores(pred, truth)
    ba_micro, ba_macro = balanced_accuracy(pred, truth)
    p, _ = _pair(pred, truth)
    return {
        "f1_micro": f1_micro,
        "f1_macro": f1_macro,
        "ba_micro": ba_micro,
        "ba_macro": ba_macro,
        "hamming_loss": hamming_loss(pred, truth),
        "n": int(p.shape[0]),
        "labels": int(p.shape[1]),
    }
