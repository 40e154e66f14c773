"""End-to-end pipeline: clean, filter, build graphs, train the heads, evaluate."""

from __future__ import annotations

import contextlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gcn
from .checkpoint import load_checkpoint, save_checkpoint
from .config import PipelineConfig, dump_config, load_config
from .corpus import (
    BRANCH_NAMES,
    FICTION,
    NONFICTION,
    DatasetSplit,
    load_dataset,
    load_taxonomy,
    preprocess_book,
    split_dataset,
    tokenize,
)
from .embeddings import HashingEncoder, PrecomputedProvider, load_embedding_table, load_word_vectors
from .errors import ConfigError, DataError, HigemineError
from .hierarchy import FLAT, Head, Predictor, lambda_vector
from .labelgraph import (
    compute_cooccurrence,
    genre_word_embeddings,
    label_matrix,
    label_static_embeddings,
    label_words,
    threshold_cooccurrence,
)
from .metrics import CONVENTIONS, REPORT_SCHEMA_VERSION, level1_metrics, multilabel_metrics
from .review_filter import build_vocabulary, filter_corpus, write_filter_sidecar
from .sparse import SparseMatrix, normalize_adjacency
from .textgraph import TextGraph, build_text_graph
from .training import train_level1, train_level2

log = logging.getLogger(__name__)

HEAD_NAMES = {"2f": "fiction", "2nf": "nonfiction"}


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except HigemineError as exc:
        if str(exc).startswith("["):
            raise
        raise type(exc)(f"[{name}] {exc}") from exc


@dataclass
class HeadData:
    name: str
    level1: int | None
    genres: tuple[str, ...]
    inputs: gcn.DualGraphInputs
    label_adj: SparseMatrix
    label_psi: tuple[float, float]
    label_static: np.ndarray
    targets: np.ndarray
    gate: np.ndarray


@dataclass
class PreparedData:
    cfg: PipelineConfig
    taxonomy: object
    books: list
    split: DatasetSplit
    filtered: dict
    vocab: list[str]
    blurb_graph: TextGraph
    review_graph: TextGraph
    doc_index: dict[str, int]
    lambda1: np.ndarray
    lambda2: np.ndarray
    level1_inputs: gcn.DualGraphInputs
    heads: dict[str, HeadData] = field(default_factory=dict)

    def rows(self, ids) -> np.ndarray:
        return np.array([self.doc_index[i] for i in ids], dtype=int)

    @property
    def level1_labels(self) -> np.ndarray:
        return np.array([b.level1 for b in self.books], dtype=np.float64)


# -- embeddings --------------------------------------------------------------


class _Embedder:
    """Resolves document vectors for each role (filter, blurb, review, per-branch variants)."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self._tables = {}
        self.hashing = HashingEncoder(cfg.embedding_dim, cfg.hash_seed)

    def _table(self, role):
        path = getattr(self.cfg, f"embedding_table_{role}", "")
        if not path and "_" in role:
            return self._table(role.split("_")[0])
        if not path:
            raise ConfigError(f"embedding_source=precomputed needs embedding_table_{role}")
        if path not in self._tables:
            self._tables[path] = load_embedding_table(path)
        return self._tables[path]

    def filter_provider(self):
        if self.cfg.embedding_source == "hashing":
            return self.hashing
        return PrecomputedProvider(self._table("filter"))

    def documents(self, role: str, books, texts) -> np.ndarray:
        if self.cfg.embedding_source == "hashing":
            return self.hashing.embed_many(texts)
        table = self._table(role)
        return np.stack([table[b.id] for b in books]) if books else np.zeros((0, table.dim))


def _projection(j: int, e: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, j, e])
    return rng.standard_normal((j, e)) / np.sqrt(e)


def _label_vectors(cfg: PipelineConfig, genres, dim: int):
    if cfg.word_vectors:
        return load_word_vectors(cfg.word_vectors)
    enc = HashingEncoder(dim, cfg.hash_seed + 1)
    words = {w for g in genres for w in label_words(g)}
    return {w: enc.embed(w) for w in words}


# -- preparation -------------------------------------------------------------


def prepare(cfg: PipelineConfig, books=None, taxonomy=None) -> PreparedData:
    """Everything up to (not including) training. ``books``/``taxonomy`` override the files."""
    with stage("load"):
        if taxonomy is None:
            if not cfg.taxonomy:
                raise ConfigError("config needs 'taxonomy'")
            taxonomy = load_taxonomy(cfg.taxonomy)
        if books is None:
            if not cfg.dataset:
                raise ConfigError("config needs 'dataset'")
            books = load_dataset(cfg.dataset, taxonomy)
    with stage("preprocess"):
        if cfg.use_preprocessing:
            books = [preprocess_book(b) for b in books]
        split = split_dataset(books, cfg.seed)
    embedder = _Embedder(cfg)
    with stage("filter"):
        filtered = filter_corpus(books, embedder.filter_provider(), cfg.filter_config())
    with stage("vocabulary"):
        vocab = build_vocabulary(books, filtered, cfg.vocab_config())
    with stage("graphs"):
        blurb_tokens = [tokenize(b.blurb) for b in books]
        review_texts = [filtered[b.id].consolidated for b in books]
        review_tokens = [tokenize(t) for t in review_texts]
        ids = [b.id for b in books]
        blurb_graph = build_text_graph(list(zip(ids, blurb_tokens)), vocab, cfg.window, "blurb")
        review_graph = build_text_graph(list(zip(ids, review_tokens)), vocab, cfg.window, "review")
        blurb_adj = normalize_adjacency(blurb_graph.adjacency)
        review_adj = normalize_adjacency(review_graph.adjacency)
    n, m = len(books), len(vocab)
    lcfg = cfg.lambda_config()
    b_counts = [len(t) for t in blurb_tokens]
    r_counts = [len(t) for t in review_tokens]
    lam1 = lambda_vector(b_counts, r_counts, lcfg, 1)
    lam2 = lambda_vector(b_counts, r_counts, lcfg, 2)
    with stage("embeddings"):
        xb = embedder.documents("blurb", books, [b.blurb for b in books])
        xp = embedder.documents("review", books, review_texts)
        j = xb.shape[1]
        level1_inputs = gcn.DualGraphInputs(
            blurb_adj, review_adj,
            np.vstack([xb, np.zeros((m, j))]),
            np.vstack([xp, np.zeros((m, xp.shape[1]))]),
            n,
        )
    data = PreparedData(
        cfg, taxonomy, books, split, filtered, vocab, blurb_graph, review_graph,
        dict(blurb_graph.doc_index), lam1, lam2, level1_inputs,
    )
    train_books = [books[i] for i in data.rows(split.train)]
    branches = [FICTION, NONFICTION] if cfg.hierarchy else [None]
    for level1 in branches:
        name = FLAT if level1 is None else BRANCH_NAMES[level1]
        with stage(f"label-graph:{name}"):
            data.heads[name] = _prepare_head(data, embedder, train_books, level1, review_texts)
    return data


def _prepare_head(data: PreparedData, embedder, train_books, level1, review_texts) -> HeadData:
    cfg, taxonomy, books = data.cfg, data.taxonomy, data.books
    genres = taxonomy.genres(level1)
    k = len(genres)
    e = cfg.label_dim or cfg.embedding_dim
    x_e = label_static_embeddings(genres, _label_vectors(cfg, genres, e), None if cfg.word_vectors else e)
    if x_e.shape[1] != e:
        raise DataError(f"word vectors have width {x_e.shape[1]}, label_dim is {e}")
    graph = threshold_cooccurrence(compute_cooccurrence(train_books, level1, taxonomy), cfg.psi1, cfg.psi2, genres)
    label_adj = normalize_adjacency(graph.adjacency)
    m = len(data.vocab)
    if cfg.use_word_features:
        x_tk = genre_word_embeddings(train_books, data.filtered, data.vocab, level1, x_e, taxonomy).embeddings
    else:
        x_tk = np.zeros((m, e))
    suffix = "" if level1 is None else "_" + BRANCH_NAMES[level1]
    xb = embedder.documents("blurb" + suffix, books, [b.blurb for b in books])
    xp = embedder.documents("review" + suffix, books, review_texts)
    if xb.shape[1] != e:
        proj = _projection(xb.shape[1], e, cfg.seed)
        xb, xp = xb @ proj, xp @ proj
    inputs = gcn.DualGraphInputs(
        data.level1_inputs.blurb_adj, data.level1_inputs.review_adj,
        np.vstack([xb, x_tk]), np.vstack([xp, x_tk]), len(books),
    )
    targets = label_matrix(books, level1, k, (0, taxonomy.size(FICTION)))
    if level1 is None:
        gate = np.ones(len(books))
    else:
        gate = np.array([float(b.level1 == level1) for b in books])
    return HeadData(
        FLAT if level1 is None else BRANCH_NAMES[level1], level1, genres, inputs,
        label_adj, (cfg.psi1, cfg.psi2), x_e, targets, gate,
    )


# -- training ----------------------------------------------------------------


@dataclass
class TrainedModels:
    level1: gcn.Level1Model | None = None
    heads: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)


def _head_seed(cfg, name):
    return cfg.seed + {"level1": 0, "fiction": 1, "nonfiction": 2, FLAT: 3}[name]


def train_models(data: PreparedData, levels=("1", "2f", "2nf")) -> TrainedModels:
    cfg = data.cfg
    tcfg = cfg.train_config()
    mcfg = cfg.model_config()
    out = TrainedModels()
    train_rows, val_rows = data.rows(data.split.train), data.rows(data.split.val)
    if "1" in levels:
        if not cfg.hierarchy:
            raise ConfigError("Level-1 does not exist with hierarchy disabled")
        with stage("train:level1"):
            model, report = train_level1(
                data.level1_inputs, data.level1_labels, tcfg, train_rows, val_rows, data.lambda1, mcfg
            )
        out.level1, out.reports["level1"] = model, report
    if cfg.hierarchy:
        wanted = [HEAD_NAMES[lv] for lv in ("2f", "2nf") if lv in levels]
    else:
        wanted = [FLAT] if {"2f", "2nf", "flat"} & set(levels) else []
    for name in wanted:
        head = data.heads[name]
        with stage(f"train:{name}"):
            seed = _head_seed(cfg, name)
            model = gcn.init_level2(
                head.inputs.blurb_features.shape[1], head.label_static, mcfg, seed,
                cfg.use_label_network, cfg.learn_label_embeddings,
            )
            hcfg = cfg.train_config()
            hcfg.seed = seed
            model, report = train_level2(
                name, head.inputs, head.label_adj, model, head.targets, head.gate, hcfg,
                train_rows, val_rows, data.lambda2, cfg.decision_threshold,
            )
        out.heads[name], out.reports[name] = model, report
    return out


def build_predictor(data: PreparedData, models: TrainedModels) -> Predictor:
    heads = {
        name: Head(model, data.heads[name].inputs, data.heads[name].label_adj, data.heads[name].genres)
        for name, model in models.heads.items()
    }
    return Predictor(
        data.doc_index,
        heads,
        data.lambda1 if data.cfg.hierarchy else None,
        data.lambda2,
        models.level1,
        data.level1_inputs if models.level1 is not None else None,
        data.cfg.decision_threshold,
    )


# -- evaluation --------------------------------------------------------------


def evaluate(data: PreparedData, predictor: Predictor, ids=None) -> dict:
    ids = list(data.split.test if ids is None else ids)
    preds = {p.id: p for p in predictor.predict_many(ids)}
    books = {b.id: b for b in data.books}
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "mode": "hierarchical" if data.cfg.hierarchy else "flat",
        "config_hash": data.cfg.config_hash(),
        "counts": {
            "train": len(data.split.train),
            "val": len(data.split.val),
            "test": len(data.split.test),
            "evaluated": len(ids),
            "vocabulary": len(data.vocab),
        },
        "conventions": CONVENTIONS,
    }
    if data.cfg.hierarchy:
        truth = np.array([books[i].level1 for i in ids])
        routed = np.array([int(preds[i].level1 == "nonfiction") for i in ids])
        report["level1"] = level1_metrics(routed, truth)
    level2 = {}
    k_fiction = data.taxonomy.size(FICTION)
    for level1, branch in enumerate(BRANCH_NAMES):
        members = [i for i in ids if books[i].level1 == level1]
        k = data.taxonomy.size(level1)
        truth = np.array([books[i].level2 for i in members]).reshape(len(members), k)
        pred = np.zeros_like(truth)
        for r, i in enumerate(members):
            p = preds[i]
            if not data.cfg.hierarchy:
                lo = 0 if level1 == FICTION else k_fiction
                pred[r] = p.decisions[lo : lo + k]
            elif p.level1 == branch:
                pred[r] = p.decisions
        level2[branch] = multilabel_metrics(pred, truth)
    report["level2"] = level2
    return report


# -- artifacts ---------------------------------------------------------------


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def checkpoint_paths(out_dir: Path) -> dict[str, Path]:
    ck = out_dir / "checkpoints"
    return {
        "level1": ck / "level1.ckpt",
        "fiction": ck / "level2_fiction.ckpt",
        "nonfiction": ck / "level2_nonfiction.ckpt",
        FLAT: ck / "level2_flat.ckpt",
    }


def write_preparation(data: PreparedData, out_dir) -> dict[str, str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_filter_sidecar(data.filtered, out_dir / "filter.jsonl")
    (out_dir / "vocab.txt").write_text("\n".join(data.vocab) + "\n", encoding="utf-8")
    _write_json(out_dir / "split.json", data.split.to_dict())
    dump_config(data.cfg, out_dir / "config.resolved.yaml")
    return {
        "filter": str(out_dir / "filter.jsonl"),
        "vocab": str(out_dir / "vocab.txt"),
        "split": str(out_dir / "split.json"),
    }


def save_models(data: PreparedData, models: TrainedModels, out_dir) -> dict[str, str]:
    paths = checkpoint_paths(Path(out_dir))
    paths["level1"].parent.mkdir(parents=True, exist_ok=True)
    chash = data.cfg.config_hash()
    written = {}
    if models.level1 is not None:
        save_checkpoint(paths["level1"], models.level1, chash, {"head": "level1"})
        written["level1"] = str(paths["level1"])
    for name, model in models.heads.items():
        head = data.heads[name]
        save_checkpoint(
            paths[name], model, chash,
            {"head": name, "genres": list(head.genres), "psi1": head.label_psi[0], "psi2": head.label_psi[1]},
            {"label_adjacency": head.label_adj.to_dense()},
        )
        written[name] = str(paths[name])
    for name, path in written.items():
        if name in models.reports:
            models.reports[name].checkpoint = path
    return written


def load_models(data: PreparedData, out_dir) -> TrainedModels:
    out = TrainedModels()
    chash = data.cfg.config_hash()
    for name, path in checkpoint_paths(Path(out_dir)).items():
        if not path.exists():
            continue
        model, header, _ = load_checkpoint(path)
        if header["config_hash"] != chash:
            raise ConfigError(f"{path} was trained with a different config ({header['config_hash']} != {chash})")
        if name == "level1":
            out.level1 = model
        elif name in data.heads:
            out.heads[name] = model
    if data.cfg.hierarchy and (out.level1 is None or len(out.heads) < 2):
        raise DataError(f"missing trained checkpoints under {out_dir}; run 'higemine train' first")
    if not data.cfg.hierarchy and FLAT not in out.heads:
        raise DataError(f"missing flat checkpoint under {out_dir}")
    return out


def run_pipeline(config, write: bool = True, books=None, taxonomy=None):
    """Prepare, train every head, evaluate on the test split.

    ``config`` is a path or a :class:`PipelineConfig`. Returns the metric
    report and a dict of written artifact paths (empty when ``write`` is off).
    """
    cfg = load_config(config) if not isinstance(config, PipelineConfig) else config
    data = prepare(cfg, books, taxonomy)
    levels = ("1", "2f", "2nf") if cfg.hierarchy else ("flat",)
    models = train_models(data, levels)
    with stage("evaluate"):
        report = evaluate(data, build_predictor(data, models))
    artifacts = {}
    if write:
        out_dir = Path(cfg.output_dir)
        artifacts.update(write_preparation(data, out_dir))
        artifacts.update(save_models(data, models, out_dir))
        _write_json(out_dir / "train_report.json", {k: r.to_dict() for k, r in models.reports.items()})
        _write_json(out_dir / "metrics.json", report)
        artifacts["train_report"] = str(out_dir / "train_report.json")
        artifacts["metrics"] = str(out_dir / "metrics.json")
    return report, artifacts
