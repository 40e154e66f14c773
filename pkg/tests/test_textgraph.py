import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from higemine.sparse import normalize_adjacency
from higemine.textgraph import build_text_graph, compute_ppmi, compute_tfidf, sliding_windows
from helpers import FIXTURES
from oracles import brute_ppmi, brute_tfidf

# shipped (docs, vocab) corpora with at most 5 docs and 10 tokens
SMALL_CORPORA = [(c["docs"], c["vocab"]) for c in json.loads((FIXTURES / "graph_corpora.json").read_text())]


def as_dict(m):
    return {(i, j): v for i, j, v in m.entries()}


def test_tfidf_examples():
    m = compute_tfidf([["a"]], ["a", "b"])
    assert as_dict(m) == {(0, 0): 1.0}
    docs = [["a", "x"], ["a"], ["a", "y"], ["a"]]
    m = compute_tfidf(docs, ["a", "x", "y"])
    assert all(m.get(d, 0) == 1.0 for d in range(4))
    assert m.get(1, 1) == 0.0


def test_ppmi_single_window_clamps_to_zero():
    assert compute_ppmi([["a", "b"]], ["a", "b"], window=5).nnz == 0


def test_ppmi_ln2():
    docs, vocab = SMALL_CORPORA[0]
    m = compute_ppmi(docs, vocab, window=2)
    assert m.get(0, 1) == pytest.approx(math.log(2), abs=1e-15)
    assert m.get(0, 2) == 0.0
    assert m.get(0, 1) == pytest.approx(0.6931, abs=1e-4)


def test_sliding_windows():
    assert sliding_windows([], 3) == []
    assert sliding_windows([1, 2], 3) == [[1, 2]]
    assert sliding_windows([1, 2, 3, 4], 3) == [[1, 2, 3], [2, 3, 4]]


@pytest.mark.parametrize("docs, vocab", SMALL_CORPORA)
@pytest.mark.parametrize("window", [2, 3, 5])
def test_against_brute_force(docs, vocab, window):
    assert as_dict(compute_tfidf(docs, vocab)) == brute_tfidf(docs, vocab)
    assert as_dict(compute_ppmi(docs, vocab, window)) == brute_ppmi(docs, vocab, window)


@given(
    st.lists(st.lists(st.sampled_from("abcdefg"), max_size=9), min_size=1, max_size=5),
    st.integers(2, 6),
)
@settings(max_examples=150, deadline=None)
def test_ppmi_property(docs, window):
    vocab = sorted({t for d in docs for t in d}) or ["a"]
    m = compute_ppmi(docs, vocab, window)
    assert as_dict(m) == brute_ppmi(docs, vocab, window)
    assert all(v > 0 for v in m.values())
    assert m.is_symmetric()


def test_two_doc_graph_pinned():
    docs = [("d1", ["a", "a", "b"]), ("d2", ["c", "b", "c"])]
    g = build_text_graph(docs, ["a", "b", "c"], window=2)
    idf_rare = math.log(3 / 2) + 1
    expected = np.zeros((5, 5))
    expected[0, 2] = expected[2, 0] = 2 * idf_rare
    expected[0, 3] = expected[3, 0] = 1.0
    expected[1, 3] = expected[3, 1] = 1.0
    expected[1, 4] = expected[4, 1] = 2 * idf_rare
    expected[3, 4] = expected[4, 3] = math.log(4 / 3)
    assert np.allclose(g.adjacency.to_dense(), expected, rtol=0, atol=1e-15)
    assert g.doc_index == {"d1": 0, "d2": 1}
    assert g.token_index == {"a": 2, "b": 3, "c": 4}


def test_graph_block_structure():
    docs, vocab = SMALL_CORPORA[2]
    g = build_text_graph(list(zip(["p", "q", "r", "s"], docs)), vocab, window=3)
    a = g.adjacency.to_dense()
    n = 4
    assert np.array_equal(a, a.T)
    assert not a[:n, :n].any()
    tfidf = compute_tfidf(docs, vocab).to_dense()
    assert np.array_equal(a[:n, n:], tfidf)
    assert np.array_equal(a[n:, n:], compute_ppmi(docs, vocab, 3).to_dense())
    assert (a >= 0).all()


def test_empty_docs_graph():
    g = build_text_graph([("x", []), ("y", [])], ["a", "b"], window=3)
    assert g.adjacency.nnz == 0
    assert np.array_equal(normalize_adjacency(g.adjacency).to_dense(), np.eye(4))


def test_blurb_and_review_graphs_share_token_index():
    vocab = ["a", "b", "c"]
    gb = build_text_graph([("d", ["a"]), ("e", ["b"])], vocab, kind="blurb")
    gp = build_text_graph([("d", ["c", "c"]), ("e", [])], vocab, kind="review")
    assert gb.token_index == gp.token_index


def test_duplicate_ids():
    with pytest.raises(ValueError):
        build_text_graph([("d", ["a"]), ("d", ["a"])], ["a"])


def test_stats():
    docs, vocab = SMALL_CORPORA[1]
    g = build_text_graph(list(zip(["d1", "d2"], docs)), vocab, window=2)
    s = g.stats()
    assert s["nodes"] == 5 and s["doc_token_edges"] == 4 and s["token_token_edges"] == 1
    assert sum(s["doc_token_histogram"]["counts"]) == 4
