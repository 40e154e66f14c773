"""Blurb-anchored review filtering and vocabulary extraction."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import tokenize
from .errors import DataError, ShapeError


@dataclass(frozen=True)
class FilterConfig:
    floor: float = 0.35
    min_blurb_tokens: int = 20
    enabled: bool = True


@dataclass(frozen=True)
class VocabConfig:
    min_df: int = 1
    max_df_ratio: float = 1.0


@dataclass
class FilterResult:
    kept_indices: list[int]
    similarities: list[float]
    consolidated: str
    threshold_used: float
    bypass: bool

    def sidecar(self, book_id: str) -> dict:
        return {
            "id": book_id,
            "kept": self.kept_indices,
            "similarities": self.similarities,
            "threshold": self.threshold_used,
            "bypass": self.bypass,
        }


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"length mismatch: {u.shape} vs {v.shape}")
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return max(-1.0, min(1.0, float(u @ v) / (nu * nv)))


def select_reviews(similarities, floor: float) -> tuple[list[int], float]:
    """Apply the per-book threshold max(floor, mean similarity).

    Falls back to the single most similar review when nothing clears it.
    """
    if len(similarities) == 0:
        return [], floor
    sims = [float(s) for s in similarities]
    threshold = max(floor, math.fsum(sims) / len(sims))
    kept = [i for i, s in enumerate(sims) if s >= threshold]
    if not kept:
        kept = [max(range(len(sims)), key=lambda i: (sims[i], -i))]
    return kept, threshold


def filter_reviews(blurb: str, reviews, provider, cfg: FilterConfig = FilterConfig()) -> FilterResult:
    reviews = list(reviews)
    if not cfg.enabled or len(tokenize(blurb)) < cfg.min_blurb_tokens:
        kept = list(range(len(reviews)))
        return FilterResult(kept, [], " ".join(reviews), cfg.floor, True)
    anchor = provider.embed(blurb)
    sims = [cosine_similarity(anchor, provider.embed(r)) for r in reviews]
    kept, threshold = select_reviews(sims, cfg.floor)
    return FilterResult(kept, sims, " ".join(reviews[i] for i in kept), threshold, False)


def filter_corpus(books, provider, cfg: FilterConfig = FilterConfig()) -> dict[str, FilterResult]:
    return {b.id: filter_reviews(b.blurb, b.reviews, provider, cfg) for b in books}


def write_filter_sidecar(results: dict[str, FilterResult], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for book_id, res in results.items():
            fh.write(json.dumps(res.sidecar(book_id)) + "\n")


def build_vocabulary(books, filtered: dict[str, FilterResult], cfg: VocabConfig = VocabConfig()) -> list[str]:
    """Sorted tokens of blurbs plus consolidated reviews, pruned by document frequency.

    One book (blurb and its consolidated review together) counts as one document.
    """
    df = Counter()
    for book in books:
        df.update(set(tokenize(book.blurb)) | set(tokenize(filtered[book.id].consolidated)))
    n = len(books)
    ceiling = cfg.max_df_ratio * n
    vocab = sorted(t for t, c in df.items() if cfg.min_df <= c <= ceiling)
    if not vocab:
        raise DataError("vocabulary is empty after document-frequency pruning")
    return vocab
