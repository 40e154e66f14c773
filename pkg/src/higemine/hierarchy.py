"""Adaptive modality weights and gated two-level inference."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import gcn
from .corpus import BRANCH_NAMES
from .errors import ConfigError, DataError
from .training import decide

FLAT = "flat"


@dataclass(frozen=True)
class LambdaConfig:
    """Fusion weights. ``lambda1``/``lambda2`` are a number or ``"adaptive"``."""

    lambda1: float | str = "adaptive"
    lambda2: float | str = "adaptive"
    empirical1: float = 0.3
    empirical2: float = 0.7
    min_blurb_tokens: int = 20
    min_review_tokens: int = 20

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "empirical1", "empirical2"):
            v = getattr(self, name)
            if v == "adaptive" and name.startswith("lambda"):
                continue
            if isinstance(v, str) or not 0.0 <= float(v) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1] or 'adaptive', got {v!r}")


def adaptive_lambda(blurb_tokens: int, review_tokens: int, cfg: LambdaConfig = LambdaConfig(), level: int = 1) -> float:
    blurb_short = blurb_tokens < cfg.min_blurb_tokens
    review_short = review_tokens < cfg.min_review_tokens
    if blurb_short and review_short:
        return 0.5
    if blurb_short:
        return 0.0
    if review_short:
        return 1.0
    return cfg.empirical1 if level == 1 else cfg.empirical2


def lambda_vector(blurb_counts, review_counts, cfg: LambdaConfig, level: int) -> np.ndarray:
    """Per-document lambda: the fixed value, or the adaptive rule per document."""
    setting = cfg.lambda1 if level == 1 else cfg.lambda2
    n = len(blurb_counts)
    if setting != "adaptive":
        return np.full(n, float(setting))
    return np.array([adaptive_lambda(b, r, cfg, level) for b, r in zip(blurb_counts, review_counts)])


@dataclass
class Head:
    model: gcn.Level2Model
    inputs: gcn.DualGraphInputs
    label_adj: object
    genres: tuple[str, ...]


@dataclass
class Prediction:
    id: str
    level1: str | None
    level1_probability: float | None
    genres: list[str]
    probabilities: list[float]
    decisions: list[int]
    lambdas_used: tuple[float | None, float]

    @property
    def predicted_genres(self) -> list[str]:
        return [g for g, d in zip(self.genres, self.decisions) if d]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "level1": self.level1,
            "level1_probability": self.level1_probability,
            "genres": self.genres,
            "probabilities": self.probabilities,
            "decisions": self.decisions,
            "predicted": self.predicted_genres,
            "lambdas_used": list(self.lambdas_used),
        }


@dataclass
class Predictor:
    """Routes each document through Level-1 and then exactly one Level-2 head.

    ``heads`` maps "fiction"/"nonfiction" (or "flat" when the hierarchy is off)
    to trained heads. Full-graph forwards are cached per head; ``forward_calls``
    counts head forwards and ``scored`` records which documents each head
    scored, so gate exclusivity can be checked from outside.
    """

    doc_index: dict[str, int]
    heads: dict[str, Head]
    lambda1: np.ndarray | None
    lambda2: np.ndarray
    level1_model: gcn.Level1Model | None = None
    level1_inputs: gcn.DualGraphInputs | None = None
    decision_threshold: float = 0.5
    forward_calls: Counter = field(default_factory=Counter)
    scored: dict = field(default_factory=dict)
    _level1_cache: np.ndarray | None = None
    _head_cache: dict = field(default_factory=dict)

    @property
    def flat(self) -> bool:
        return self.level1_model is None

    def level1_probabilities(self) -> np.ndarray:
        if self._level1_cache is None:
            self.forward_calls["level1"] += 1
            logits = gcn.level1_forward(self.level1_model, self.level1_inputs, self.lambda1)
            self._level1_cache = gcn.sigmoid(logits)
        return self._level1_cache

    def _head_probabilities(self, name: str) -> np.ndarray:
        if name not in self._head_cache:
            head = self.heads.get(name)
            if head is None:
                raise DataError(f"no trained Level-2 head {name!r}")
            self.forward_calls[name] += 1
            self._head_cache[name] = gcn.level2_forward(head.model, head.inputs, head.label_adj, self.lambda2)
        return self._head_cache[name]

    def route(self, book_id: str) -> tuple[str, float | None]:
        row = self._row(book_id)
        if self.flat:
            return FLAT, None
        p1 = float(self.level1_probabilities()[row])
        return BRANCH_NAMES[int(p1 >= 0.5)], p1

    def _row(self, book_id):
        try:
            return self.doc_index[book_id]
        except KeyError:
            raise DataError(f"book {book_id!r} has no document row in the graphs") from None

    def predict(self, book_id: str) -> Prediction:
        row = self._row(book_id)
        branch, p1 = self.route(book_id)
        probs = self._head_probabilities(branch)[row]
        self.scored.setdefault(branch, []).append(book_id)
        decisions = decide(probs[None, :], self.decision_threshold)[0]
        return Prediction(
            book_id,
            None if self.flat else branch,
            p1,
            list(self.heads[branch].genres),
            [float(p) for p in probs],
            [int(d) for d in decisions],
            (None if self.lambda1 is None else float(self.lambda1[row]), float(self.lambda2[row])),
        )

    def predict_many(self, book_ids) -> list[Prediction]:
        return [self.predict(b) for b in book_ids]
