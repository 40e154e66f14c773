"""Genre co-occurrence graph, label embeddings and genre-aware word features."""

from __future__ import annotations

import re
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import tokenize
from .errors import DataError
from .sparse import SparseMatrix


@dataclass
class LabelGraph:
    adjacency: SparseMatrix
    labels: tuple[str, ...]
    psi1: float
    psi2: float


@dataclass
class LabelEmbeddings:
    static: np.ndarray
    learnable: np.ndarray

    @classmethod
    def from_static(cls, static) -> "LabelEmbeddings":
        static = np.array(static, dtype=np.float64)
        static.setflags(write=False)
        return cls(static, np.zeros_like(static))

    @property
    def combined(self) -> np.ndarray:
        return self.static + self.learnable


@dataclass
class GenreWordEmbeddings:
    frequencies: np.ndarray
    embeddings: np.ndarray


def label_matrix(books, level1: int | None, n_labels: int, offsets=(0, 0)) -> np.ndarray:
    """Stack level-2 vectors of ``books`` into an n x k' 0/1 matrix.

    With ``level1=None`` (flat mode) every book's vector is placed at
    ``offsets[book.level1]`` inside a k1 + k2 wide row.
    """
    y = np.zeros((len(books), n_labels))
    for r, book in enumerate(books):
        if level1 is None:
            start = offsets[book.level1]
            y[r, start : start + len(book.level2)] = book.level2
        elif book.level1 == level1:
            y[r, :] = book.level2
    return y


def cooccurrence_from_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    joint = y.T @ y
    counts = np.diag(joint).copy()
    m = np.zeros_like(joint)
    nz = counts > 0
    m[:, nz] = joint[:, nz] / counts[nz]
    np.fill_diagonal(m, 0.0)
    return m


def compute_cooccurrence(train_books, level1: int | None, taxonomy) -> np.ndarray:
    """Conditional probabilities M[i, j] = P(label i | label j) from training books.

    ``level1=None`` pools both branches over the concatenated genre list.
    """
    books = [b for b in train_books if level1 is None or b.level1 == level1]
    if not books:
        raise DataError(f"no training books in branch {level1!r}")
    k = taxonomy.size(level1)
    return cooccurrence_from_labels(label_matrix(books, level1, k, (0, taxonomy.size(0))))


def threshold_cooccurrence(m, psi1: float, psi2: float, labels=()) -> LabelGraph:
    if not 0.0 <= psi1 <= psi2 <= 1.0:
        raise ValueError(f"need 0 <= psi1 <= psi2 <= 1, got psi1={psi1}, psi2={psi2}")
    m = np.asarray(m, dtype=np.float64)
    entries = []
    for i, j in zip(*np.nonzero(m)):
        w = m[i, j]
        if w < psi1:
            continue
        entries.append((int(i), int(j), 1.0 if w >= psi2 else float(w)))
    adj = SparseMatrix.from_entries(m.shape[0], m.shape[1], entries)
    return LabelGraph(adj, tuple(labels), psi1, psi2)


def label_words(label: str) -> list[str]:
    return re.findall(r"[^\W_]+", label.lower())


def label_static_embeddings(labels, vectors: dict, dim: int | None = None) -> np.ndarray:
    """Mean of the word vectors making up each label name.

    Unknown words contribute a zero vector to the mean.
    """
    if dim is None:
        if not vectors:
            raise ValueError("dim is required when the vector map is empty")
        dim = len(next(iter(vectors.values())))
    out = np.zeros((len(labels), dim))
    for r, label in enumerate(labels):
        words = label_words(label)
        missing = [w for w in words if w not in vectors]
        if missing:
            warnings.warn(f"label {label!r}: no vector for {missing}", stacklevel=2)
        known = [vectors[w] for w in words if w in vectors]
        if known:
            out[r] = np.sum(known, axis=0) / len(words)
    return out


def genre_word_embeddings(train_books, filtered, vocab, level1: int | None, x_e, taxonomy=None) -> GenreWordEmbeddings:
    """Per-word genre frequency profiles, z-scored, projected on label embeddings.

    gamma[i, j] sums the blurb and consolidated-review counts of word i over
    training books carrying genre j. Each row is z-scored across genres and
    replaced by its absolute value (a zero-variance row becomes all zeros).
    """
    x_e = np.asarray(x_e, dtype=np.float64)
    if not vocab:
        raise DataError("empty vocabulary")
    k = x_e.shape[0]
    if k == 0:
        raise DataError("empty label set")
    if level1 is None and taxonomy is None:
        raise ValueError("flat mode needs the taxonomy to place branch vectors")
    index = {t: i for i, t in enumerate(vocab)}
    offsets = (0, taxonomy.size(0)) if taxonomy is not None else (0, 0)
    gamma = np.zeros((len(vocab), k))
    for book in train_books:
        if level1 is not None and book.level1 != level1:
            continue
        labels = label_matrix([book], level1, k, offsets)[0]
        genres = np.flatnonzero(labels)
        counts = Counter(tokenize(book.blurb))
        counts.update(tokenize(filtered[book.id].consolidated))
        for tok, c in counts.items():
            i = index.get(tok)
            if i is not None:
                gamma[i, genres] += c
    mean = gamma.mean(axis=1, keepdims=True)
    std = gamma.std(axis=1, keepdims=True)
    z = np.zeros_like(gamma)
    ok = std[:, 0] > 0
    z[ok] = (gamma[ok] - mean[ok]) / std[ok]
    gamma = np.abs(z)
    return GenreWordEmbeddings(gamma, gamma @ x_e)
