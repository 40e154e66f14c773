"""Heterogeneous document-token graphs with TF-IDF and PPMI edge weights."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparse import SparseMatrix


@dataclass
class TextGraph:
    adjacency: SparseMatrix
    doc_index: dict[str, int]
    token_index: dict[str, int]
    kind: str

    @property
    def n_docs(self) -> int:
        return len(self.doc_index)

    @property
    def n_tokens(self) -> int:
        return len(self.token_index)

    def stats(self) -> dict:
        n = self.n_docs
        entries = self.adjacency.entries()
        doc_tok = [w for i, j, w in entries if i < n <= j]
        tok_tok = [w for i, j, w in entries if i >= n and j >= n and i < j]
        return {
            "kind": self.kind,
            "nodes": self.adjacency.rows,
            "doc_nodes": n,
            "token_nodes": self.n_tokens,
            "doc_token_edges": len(doc_tok),
            "token_token_edges": len(tok_tok),
            "doc_token_histogram": _histogram(doc_tok),
            "token_token_histogram": _histogram(tok_tok),
        }


def _histogram(weights, bins: int = 10) -> dict:
    if not weights:
        return {"edges": [], "counts": []}
    counts, edges = np.histogram(weights, bins=bins)
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def _index_docs(docs, vocab):
    index = {tok: i for i, tok in enumerate(vocab)}
    return index, [[index[t] for t in doc if t in index] for doc in docs]


def compute_tfidf(docs, vocab) -> SparseMatrix:
    """Raw-count TF times smoothed IDF, ln((1 + n) / (1 + df)) + 1."""
    index, seqs = _index_docs(docs, vocab)
    n = len(seqs)
    df = Counter()
    for seq in seqs:
        df.update(set(seq))
    entries = []
    for d, seq in enumerate(seqs):
        for tok, tf in sorted(Counter(seq).items()):
            idf = math.log((1 + n) / (1 + df[tok])) + 1.0
            entries.append((d, tok, tf * idf))
    return SparseMatrix.from_entries(n, len(index), entries)


def sliding_windows(seq, window: int):
    """Stride-1 windows; a sequence no longer than ``window`` is one window, an empty one none."""
    if not seq:
        return []
    if len(seq) <= window:
        return [seq]
    return [seq[i : i + window] for i in range(len(seq) - window + 1)]


def compute_ppmi(docs, vocab, window: int = 20) -> SparseMatrix:
    """Token-token positive PMI over sliding windows.

    A token counts at most once per window and an unordered pair at most once
    per window. Diagonal and non-positive entries are left out.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    index, seqs = _index_docs(docs, vocab)
    m = len(index)
    n_windows = 0
    single = Counter()
    pair = Counter()
    for seq in seqs:
        for win in sliding_windows(seq, window):
            n_windows += 1
            uniq = sorted(set(win))
            single.update(uniq)
            for a in range(len(uniq)):
                for b in range(a + 1, len(uniq)):
                    pair[(uniq[a], uniq[b])] += 1
    entries = []
    for (i, j), c in sorted(pair.items()):
        pmi = math.log((c / n_windows) / ((single[i] / n_windows) * (single[j] / n_windows)))
        if pmi > 0:
            entries.append((i, j, pmi))
            entries.append((j, i, pmi))
    return SparseMatrix.from_entries(m, m, entries, symmetric=True)


def build_text_graph(docs, vocab, window: int = 20, kind: str = "blurb") -> TextGraph:
    """Assemble the (n_docs + m) square adjacency.

    ``docs`` is a list of ``(id, tokens)``. Doc rows come first in input order,
    then tokens in vocabulary order. Tokens outside ``vocab`` are skipped.
    """
    ids = [d for d, _ in docs]
    if len(set(ids)) != len(ids):
        raise ValueError("document ids must be unique")
    token_lists = [toks for _, toks in docs]
    n, m = len(docs), len(vocab)
    tfidf = compute_tfidf(token_lists, vocab).csr
    ppmi = compute_ppmi(token_lists, vocab, window).csr
    adj = sp.bmat([[sp.csr_matrix((n, n)), tfidf], [tfidf.T, ppmi]], format="csr")
    adj.eliminate_zeros()
    return TextGraph(
        SparseMatrix(adj, symmetric=True),
        {d: i for i, d in enumerate(ids)},
        {t: n + i for i, t in enumerate(vocab)},
        kind,
    )
