import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from higemine.corpus import (
    BookRecord,
    Taxonomy,
    book_to_dict,
    load_dataset,
    preprocess_text,
    save_dataset,
    split_dataset,
    tokenize,
)
from higemine.errors import DataError


def test_load_fixture_field_by_field(fixtures, taxonomy):
    books = load_dataset(fixtures / "books.jsonl", taxonomy)
    assert [b.id for b in books] == ["f1", "n1", "f2"]
    f1, n1, f2 = books
    assert f1.level1 == 0 and f1.level2 == (1, 0, 0)
    assert f1.reviews == ("Loved the dragon and the castle!!!!!", "Shipping was slow.")
    assert n1.level1 == 1 and n1.level2 == (1, 1)
    assert n1.blurb == "A history of river travel across the old empire."
    assert f2.level2 == (0, 1, 1)
    assert f2.reviews == ("Clever mystery with a science fiction twist.",)


def test_round_trip(fixtures, taxonomy, tmp_path):
    src = fixtures / "books.jsonl"
    books = load_dataset(src, taxonomy)
    out = tmp_path / "out.jsonl"
    save_dataset(books, out, taxonomy)
    original = [json.loads(line) for line in src.read_text(encoding="utf-8").splitlines()]
    again = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert original == again
    assert load_dataset(out, taxonomy) == books


def test_empty_file(tmp_path, taxonomy):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_dataset(path, taxonomy) == []


def _write(tmp_path, *objs):
    path = tmp_path / "books.jsonl"
    path.write_text("\n".join(o if isinstance(o, str) else json.dumps(o) for o in objs) + "\n")
    return path


def test_genre_from_wrong_branch(tmp_path, taxonomy):
    path = _write(tmp_path, {"id": "x", "blurb": "", "reviews": [], "level1": "fiction", "level2": ["history"]})
    with pytest.raises(DataError, match="history.*fiction"):
        load_dataset(path, taxonomy)


def test_malformed_line_reports_line_number(tmp_path, taxonomy):
    ok = {"id": "x", "blurb": "", "reviews": [], "level1": "fiction", "level2": ["fantasy"]}
    path = _write(tmp_path, ok, "{not json")
    with pytest.raises(DataError, match=":2:"):
        load_dataset(path, taxonomy)


def test_empty_level2_and_duplicate_id(tmp_path, taxonomy):
    path = _write(tmp_path, {"id": "x", "blurb": "", "reviews": [], "level1": "fiction", "level2": []})
    with pytest.raises(DataError, match="empty level2"):
        load_dataset(path, taxonomy)
    ok = {"id": "x", "blurb": "", "reviews": [], "level1": "fiction", "level2": ["fantasy"]}
    path = _write(tmp_path, ok, ok)
    with pytest.raises(DataError, match="duplicate"):
        load_dataset(path, taxonomy)


def test_taxonomy_rejects_duplicates():
    with pytest.raises(DataError):
        Taxonomy(("a", "b"), ("b",))


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("", ""),
        ("soooooo good http://x.co 🎉", "sooo good"),
        ("plain text", "plain text"),
        ("see www.example.org/page   now", "see now"),
        ("  tabs\tand\nnewlines  ", "tabs and newlines"),
        ("!!!!!!", "!!!"),
    ],
)
def test_preprocess_golden(raw, expected):
    assert preprocess_text(raw) == expected


@given(st.text())
@settings(max_examples=300)
def test_preprocess_idempotent(text):
    once = preprocess_text(text)
    assert preprocess_text(once) == once


@given(st.text())
def test_preprocess_leaves_no_long_runs(text):
    out = preprocess_text(text)
    assert all(out[i : i + 4] != out[i] * 4 for i in range(len(out)))


@pytest.mark.parametrize(
    "text, tokens",
    [("", []), ("The Great Gatsby", ["great", "gatsby"]), ("a I x", []), ("snake_case x2 Ünïcode", ["snake", "case", "x2", "ünïcode"])],
)
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def _books(n, fiction_share=0.5):
    n_f = int(n * fiction_share)
    return [BookRecord(f"b{i}", "", (), int(i >= n_f), (1,)) for i in range(n)]


def test_split_sizes():
    s = split_dataset(_books(10), seed=1)
    assert (len(s.train), len(s.val), len(s.test)) == (7, 1, 2)
    s = split_dataset(_books(57), seed=3)
    assert (len(s.train), len(s.val), len(s.test)) == (39, 5, 13)


def test_split_stratified():
    books = _books(100)
    label = {b.id: b.level1 for b in books}
    s = split_dataset(books, seed=0)
    for part in (s.train, s.val, s.test):
        fiction = sum(1 for i in part if label[i] == 0)
        assert abs(fiction - len(part) / 2) <= 1


def test_split_deterministic_and_seeded():
    books = _books(40)
    assert split_dataset(books, 5) == split_dataset(books, 5)
    assert split_dataset(books, 5).train != split_dataset(books, 6).train


def test_split_too_small():
    with pytest.raises(DataError):
        split_dataset(_books(9), 0)


@given(st.integers(10, 200), st.floats(0.1, 0.9), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_split_partitions(n, share, seed):
    books = _books(n, share)
    s = split_dataset(books, seed)
    parts = [set(s.train), set(s.val), set(s.test)]
    assert set().union(*parts) == {b.id for b in books}
    assert sum(len(p) for p in parts) == n
    assert (len(s.train), len(s.val)) == ((7 * n) // 10, n // 10)


def test_book_to_dict_uses_genre_names(taxonomy):
    book = BookRecord("z", "b", ("r",), 1, (0, 1))
    assert book_to_dict(book, taxonomy)["level2"] == ["travel"]
