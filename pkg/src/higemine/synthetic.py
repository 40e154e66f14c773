"""Synthetic book corpora with a known token-to-genre mapping.

Every genre owns a handful of signature tokens (``fantasy0``, ``fantasy1``, ...)
and every branch owns a few marker tokens. Blurbs and reviews are sampled
from these plus shared filler words, with knobs for how much signal each
modality carries and how many reviews are off-topic noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import BookRecord, Taxonomy

FICTION_GENRES = ("fantasy", "mystery", "romance", "horror")
NONFICTION_GENRES = ("history", "science", "travel", "cooking")
BRANCH_MARKERS = (("imagined", "tale", "invented"), ("factual", "documented", "researched"))
FILLER = (
    "story", "book", "read", "chapter", "author", "page", "character", "plot",
    "writing", "ending", "reader", "volume", "edition", "cover", "series",
    "narrative", "style", "pacing", "prose", "scene", "moment", "part",
    "section", "idea", "detail", "world", "journey", "voice", "tone", "theme",
)


@dataclass(frozen=True)
class CorpusSpec:
    n_books: int = 60
    signature_tokens: int = 5
    blurb_length: int = 24
    review_length: int = 24
    reviews_per_book: int = 4
    second_genre_prob: float = 0.4
    blurb_signal: float = 1.0
    review_signal: float = 1.0
    blurb_marker_prob: float = 1.0
    review_marker_prob: float = 1.0
    offtopic_review_prob: float = 0.0
    blurb_decoy_prob: float = 0.0
    review_decoy_prob: float = 0.0


def synthetic_taxonomy() -> Taxonomy:
    return Taxonomy(FICTION_GENRES, NONFICTION_GENRES)


def _signature(genre, spec):
    return [f"{genre}{i}" for i in range(spec.signature_tokens)]


def _text(rng, core, length):
    words = list(core)
    while len(words) < length:
        words.append(FILLER[rng.integers(len(FILLER))])
    rng.shuffle(words)
    return " ".join(words)


def _evidence(rng, genres, others, signal, decoy_prob, marker_words, marker_prob, spec):
    core = []
    for g in genres:
        core += [t for t in _signature(g, spec) if rng.random() < signal]
    for g in others:
        if rng.random() < decoy_prob:
            sig = _signature(g, spec)
            core.append(sig[rng.integers(len(sig))])
    core += [w for w in marker_words if rng.random() < marker_prob]
    return core


def make_corpus(spec: CorpusSpec = CorpusSpec(), seed: int = 0) -> tuple[list[BookRecord], Taxonomy]:
    rng = np.random.default_rng(seed)
    taxonomy = synthetic_taxonomy()
    books = []
    for i in range(spec.n_books):
        level1 = i % 2
        names = taxonomy.genres(level1)
        k = len(names)
        primary = (i // 2) % k
        chosen = {primary}
        if rng.random() < spec.second_genre_prob:
            chosen.add(int(rng.integers(k)))
        genres = [names[j] for j in sorted(chosen)]
        others = [g for g in names if g not in genres]
        all_other = [g for g in taxonomy.genres(None) if g not in genres]
        markers = BRANCH_MARKERS[level1]
        blurb_core = _evidence(rng, genres, others, spec.blurb_signal, spec.blurb_decoy_prob, markers, spec.blurb_marker_prob, spec)
        blurb = _text(rng, blurb_core, spec.blurb_length)
        reviews = []
        for _ in range(spec.reviews_per_book):
            if rng.random() < spec.offtopic_review_prob:
                fake = [all_other[rng.integers(len(all_other))]]
                core = _evidence(rng, fake, [], 1.0, 0.0, (), 0.0, spec)
            else:
                core = _evidence(rng, genres, others, spec.review_signal, spec.review_decoy_prob, markers, spec.review_marker_prob, spec)
            reviews.append(_text(rng, core, spec.review_length))
        vector = tuple(int(g in genres) for g in names)
        books.append(BookRecord(f"b{i:04d}", blurb, tuple(reviews), level1, vector))
    return books, taxonomy


def separable_corpus(n_books: int = 60, seed: int = 0):
    """Every blurb and review carries all signature tokens of the book's genres."""
    return make_corpus(CorpusSpec(n_books=n_books), seed)


def noisy_corpus(n_books: int = 300, seed: int = 0):
    """Reviews carry most of the genre signal plus off-topic noise; blurbs carry a weaker slice."""
    spec = CorpusSpec(
        n_books=n_books,
        blurb_signal=0.4,
        review_signal=0.6,
        blurb_marker_prob=0.6,
        review_marker_prob=0.6,
        offtopic_review_prob=0.3,
        blurb_decoy_prob=0.2,
        review_decoy_prob=0.2,
    )
    return make_corpus(spec, seed)
