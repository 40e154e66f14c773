"""Frozen document-embedding providers.

Fine-tuned language-model encoders are outside this package. Their output
enters through precomputed TSV tables; the hashing encoder is a deterministic
stand-in good enough for tests and synthetic corpora.
"""

from __future__ import annotations

import hashlib
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import tokenize
from .errors import DataError, MissingEmbeddingError

log = logging.getLogger(__name__)


def token_bucket(token: str, dim: int, seed: int = 0) -> int:
    """Bucket of ``token`` under keyed 64-bit BLAKE2b (little-endian digest)."""
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")
    ).digest()
    return int.from_bytes(digest, "little") % dim


def text_key(text: str) -> str:
    """Lookup key used by precomputed tables that are indexed by text."""
    return hashlib.sha1(text.encode("utf-8")).hexdigest()[:16]


class EmbeddingProvider:
    dim: int
    source: str

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def embed_many(self, texts) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return np.stack([self.embed(t) for t in texts])


class HashingEncoder(EmbeddingProvider):
    source = "hashing-encoder"

    def __init__(self, dim: int, seed: int = 0):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, int] = {}

    def _bucket(self, token):
        b = self._cache.get(token)
        if b is None:
            b = self._cache[token] = token_bucket(token, self.dim, self.seed)
        return b

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for tok in tokenize(text):
            vec[self._bucket(tok)] += 1.0
        norm = math.sqrt(float(vec @ vec))
        if norm > 0:
            vec /= norm
        return vec


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, key):
        return key in self.vectors

    def __getitem__(self, key) -> np.ndarray:
        try:
            return self.vectors[key]
        except KeyError:
            raise MissingEmbeddingError(f"no embedding for key {key!r}") from None

    def add(self, key: str, vector) -> None:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DataError(f"vector for {key!r} has shape {vec.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(vec)):
            raise DataError(f"vector for {key!r} has non-finite entries")
        self.vectors[key] = vec


class PrecomputedProvider(EmbeddingProvider):
    """Looks texts up in a table keyed by :func:`text_key` (or by document id)."""

    source = "precomputed-file"

    def __init__(self, table: EmbeddingTable):
        self.table = table
        self.dim = table.dim

    def embed(self, text: str) -> np.ndarray:
        return self.table[text_key(text)]

    def vector(self, key: str) -> np.ndarray:
        return self.table[key]


def load_embedding_table(path) -> EmbeddingTable:
    """Read a ``#dim=<j>`` headed TSV of ``id<TAB>v1<TAB>...`` rows."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#dim="):
        raise DataError(f"{path}: first line must be '#dim=<j>'")
    try:
        dim = int(lines[0][len("#dim="):])
    except ValueError as exc:
        raise DataError(f"{path}: bad header {lines[0]!r}") from exc
    if dim <= 0:
        raise DataError(f"{path}: dim must be positive")
    table = EmbeddingTable(dim)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        key, *values = line.split("\t")
        if len(values) != dim:
            raise DataError(f"{path}:{lineno}: row {key!r} has {len(values)} values, expected {dim}")
        try:
            vec = [float(v) for v in values]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in vec):
            raise DataError(f"{path}:{lineno}: non-finite value in row {key!r}")
        table.vectors[key] = np.array(vec)
    log.info("loaded %d vectors of dim %d from %s", len(table), dim, path)
    return table


def save_embedding_table(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim={table.dim}\n")
        for key, vec in table.vectors.items():
            fh.write(key + "\t" + "\t".join(repr(float(v)) for v in vec) + "\n")


def load_word_vectors(path) -> dict[str, np.ndarray]:
    """GloVe-style text vectors: ``token f1 f2 ...`` per line."""
    vectors: dict[str, np.ndarray] = {}
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if width is None:
                width = len(values)
            if len(values) != width or width == 0:
                raise DataError(f"{path}:{lineno}: ragged row for {token!r}")
            if token in vectors:
                warnings.warn(f"{path}:{lineno}: duplicate token {token!r}, keeping last", stacklevel=2)
            try:
                vectors[token] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return vectors
