"""Book records, taxonomy handling, text cleanup, tokenization and splitting."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError

FICTION, NONFICTION = 0, 1
BRANCH_NAMES = ("fiction", "nonfiction")


@dataclass(frozen=True)
class BookRecord:
    id: str
    blurb: str
    reviews: tuple[str, ...]
    level1: int
    level2: tuple[int, ...]

    @property
    def branch(self) -> str:
        return BRANCH_NAMES[self.level1]


@dataclass(frozen=True)
class Taxonomy:
    fiction_genres: tuple[str, ...]
    nonfiction_genres: tuple[str, ...]

    def __post_init__(self):
        names = list(self.fiction_genres) + list(self.nonfiction_genres)
        seen = set()
        for name in names:
            if name in seen:
                raise DataError(f"duplicate genre name {name!r} in taxonomy")
            seen.add(name)

    def genres(self, level1: int | None) -> tuple[str, ...]:
        """Genre list of one branch, or both branches concatenated for ``None``."""
        if level1 is None:
            return self.fiction_genres + self.nonfiction_genres
        return (self.fiction_genres, self.nonfiction_genres)[level1]

    def size(self, level1: int | None) -> int:
        return len(self.genres(level1))

    @classmethod
    def from_dict(cls, data: dict) -> "Taxonomy":
        try:
            return cls(tuple(data["fiction"]), tuple(data["nonfiction"]))
        except (KeyError, TypeError) as exc:
            raise DataError(f"taxonomy needs 'fiction' and 'nonfiction' lists: {exc}") from exc

    def to_dict(self) -> dict:
        return {"fiction": list(self.fiction_genres), "nonfiction": list(self.nonfiction_genres)}


def load_taxonomy(path) -> Taxonomy:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed taxonomy JSON: {exc}") from exc
    return Taxonomy.from_dict(data)


@dataclass
class DatasetSplit:
    train: list[str] = field(default_factory=list)
    val: list[str] = field(default_factory=list)
    test: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test)}


def book_from_dict(obj: dict, taxonomy: Taxonomy, where: str = "") -> BookRecord:
    prefix = f"{where}: " if where else ""
    if not isinstance(obj, dict):
        raise DataError(f"{prefix}book must be a JSON object")
    for key in ("id", "level1", "level2"):
        if key not in obj:
            raise DataError(f"{prefix}missing field {key!r}")
    branch = obj["level1"]
    if branch not in BRANCH_NAMES:
        raise DataError(f"{prefix}level1 must be 'fiction' or 'nonfiction', got {branch!r}")
    level1 = BRANCH_NAMES.index(branch)
    genres = taxonomy.genres(level1)
    names = obj["level2"]
    if not isinstance(names, list) or not names:
        raise DataError(f"{prefix}book {obj['id']!r} has an empty level2 genre list")
    vector = [0] * len(genres)
    for name in names:
        if name not in genres:
            raise DataError(f"{prefix}unknown genre {name!r} for branch {branch!r}")
        vector[genres.index(name)] = 1
    reviews = obj.get("reviews", [])
    if not isinstance(reviews, list) or not all(isinstance(r, str) for r in reviews):
        raise DataError(f"{prefix}reviews must be a list of strings")
    blurb = obj.get("blurb", "")
    if not isinstance(blurb, str):
        raise DataError(f"{prefix}blurb must be a string")
    return BookRecord(str(obj["id"]), blurb, tuple(reviews), level1, tuple(vector))


def book_to_dict(book: BookRecord, taxonomy: Taxonomy) -> dict:
    genres = taxonomy.genres(book.level1)
    return {
        "id": book.id,
        "blurb": book.blurb,
        "reviews": list(book.reviews),
        "level1": BRANCH_NAMES[book.level1],
        "level2": [g for g, on in zip(genres, book.level2) if on],
    }


def load_dataset(path, taxonomy: Taxonomy) -> list[BookRecord]:
    """Read a JSONL book file, validating every record against ``taxonomy``.

    Blank lines are skipped. Records keep file order.
    """
    books = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON: {exc.msg}") from exc
            book = book_from_dict(obj, taxonomy, where)
            if book.id in seen:
                raise DataError(f"{where}: duplicate book id {book.id!r}")
            seen.add(book.id)
            books.append(book)
    return books


def save_dataset(books, path, taxonomy: Taxonomy) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for book in books:
            fh.write(json.dumps(book_to_dict(book, taxonomy), ensure_ascii=False) + "\n")


# -- text cleanup ------------------------------------------------------------

_EMOJI_RANGES = [
    (0x1F000, 0x1FAFF),  # mahjong, cards, enclosed, pictographs, emoticons, transport, supplemental
    (0x2600, 0x27BF),  # misc symbols, dingbats
    (0x2B00, 0x2BFF),  # arrows / stars used as emoji
    (0x231A, 0x231B),
    (0x23E9, 0x23FA),
    (0xFE00, 0xFE0F),  # variation selectors
    (0x200D, 0x200D),  # zero width joiner
    (0x20E3, 0x20E3),  # keycap
    (0xE0020, 0xE007F),  # tag sequences
]
_EMOJI_RE = re.compile(
    "[" + "".join(f"{re.escape(chr(a))}-{re.escape(chr(b))}" for a, b in _EMOJI_RANGES) + "]"
)
_URL_RE = re.compile(r"(?:https?://|www\.)\S*", re.IGNORECASE)
_REPEAT_RE = re.compile(r"(.)\1{3,}", re.DOTALL)
_SPACE_RE = re.compile(r"\s+")


def _clean_once(text: str) -> str:
    text = _EMOJI_RE.sub("", text)
    text = _URL_RE.sub(" ", text)
    text = _REPEAT_RE.sub(r"\1\1\1", text)
    return _SPACE_RE.sub(" ", text).strip()


def preprocess_text(raw: str) -> str:
    """Strip emojis and URLs, cap character runs at 3, normalize whitespace.

    The rules are re-applied until nothing changes, so the result is a fixed
    point (collapsing ``wwww.x`` can expose a new URL, for instance).
    """
    text = raw
    while True:
        cleaned = _clean_once(text)
        if cleaned == text:
            return cleaned
        text = cleaned


def preprocess_book(book: BookRecord) -> BookRecord:
    return BookRecord(
        book.id,
        preprocess_text(book.blurb),
        tuple(preprocess_text(r) for r in book.reviews),
        book.level1,
        book.level2,
    )


# -- tokenization ------------------------------------------------------------

_TOKEN_RE = re.compile(r"[^\W_]+")


def _load_stopwords() -> frozenset[str]:
    text = resources.files("higemine").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


STOPWORDS = _load_stopwords()


def tokenize(text: str) -> list[str]:
    return [
        tok for tok in _TOKEN_RE.findall(text.lower()) if len(tok) >= 2 and tok not in STOPWORDS
    ]


# -- splitting ---------------------------------------------------------------


def split_dataset(books, seed: int) -> DatasetSplit:
    """Stratified 7:1:2 split by Level-1 label.

    Each class is shuffled, then all books are ordered by their relative rank
    within their own class, which interleaves the classes in proportion. The
    first floor(0.7n) ids go to train, the next floor(0.1n) to val, the rest to
    test.
    """
    n = len(books)
    if n < 10:
        raise DataError(f"need at least 10 books to split, got {n}")
    rng = np.random.default_rng(seed)
    keyed = []
    for label in (FICTION, NONFICTION):
        ids = [b.id for b in books if b.level1 == label]
        order = rng.permutation(len(ids))
        for rank, idx in enumerate(order):
            keyed.append(((rank + 0.5) / len(ids), label, rank, ids[idx]))
    keyed.sort()
    ordered = [item[-1] for item in keyed]
    n_train, n_val = (7 * n) // 10, n // 10
    return DatasetSplit(
        ordered[:n_train], ordered[n_train : n_train + n_val], ordered[n_train + n_val :]
    )
