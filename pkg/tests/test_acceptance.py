"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Lines are printed as they are decided and repeated in the pytest terminal
summary. Run ``pytest tests/test_acceptance.py -v`` to see them.
"""

import contextlib
import json
import time

import numpy as np
import pytest

from gradcheck import TOL, level1_errors, level2_errors, level2_fixture
from helpers import FIXTURES, small_config
from higemine import gcn
from higemine.metrics import multilabel_metrics
from higemine.pipeline import build_predictor, evaluate, prepare, run_pipeline, train_models
from higemine.sparse import SparseMatrix, normalize_adjacency
from higemine.synthetic import noisy_corpus, separable_corpus
from higemine.textgraph import compute_ppmi, compute_tfidf
from higemine.training import level2_loss_and_grads
from oracles import brute_metrics, brute_ppmi, brute_tfidf, dense_normalize

RESULTS = []


@contextlib.contextmanager
def criterion(number, title, budget=None):
    start = time.perf_counter()
    detail = {}
    try:
        yield detail
        elapsed = time.perf_counter() - start
        if budget is not None:
            assert elapsed < budget, f"took {elapsed:.1f}s, budget {budget}s"
    except BaseException as exc:
        line = f"criterion {number} FAIL  {title}: {exc}".splitlines()[0]
        RESULTS.append(line)
        print(line)
        raise
    extra = ", ".join(f"{k}={v}" for k, v in detail.items())
    line = f"criterion {number} PASS  {title} ({time.perf_counter() - start:.1f}s{', ' + extra if extra else ''})"
    RESULTS.append(line)
    print(line)


# -- 1 -----------------------------------------------------------------------


def test_criterion_1_gradients():
    with criterion(1, "gradients match central differences", budget=30) as d:
        worst = 0.0
        runs = [level1_errors(seed, lam) for seed in (0, 1) for lam in (0.3, 0.0, 1.0)]
        runs += [
            level2_errors(0, 0.7),
            level2_errors(1, 0.5, use_label_network=False),
            level2_errors(2, 0.7, learn_label_embeddings=False),
        ]
        for errors in runs:
            bad = {k: v for k, v in errors.items() if not v < TOL}
            assert not bad, f"relative error >= {TOL}: {bad}"
            worst = max(worst, max(errors.values()))
        d["max_rel_err"] = f"{worst:.1e}"


# -- 2 -----------------------------------------------------------------------


def as_dict(m):
    return {(i, j): v for i, j, v in m.entries()}


def test_criterion_2_graph_oracles():
    with criterion(2, "tfidf/ppmi exact, normalization within 1e-12", budget=10) as d:
        corpora = json.loads((FIXTURES / "graph_corpora.json").read_text())
        for c in corpora:
            docs, vocab = c["docs"], c["vocab"]
            assert len(docs) <= 5 and len(vocab) <= 10
            assert as_dict(compute_tfidf(docs, vocab)) == brute_tfidf(docs, vocab), c["name"]
            for window in (2, 3, 5, 20):
                assert as_dict(compute_ppmi(docs, vocab, window)) == brute_ppmi(docs, vocab, window), c["name"]
        worst = 0.0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            a = rng.uniform(0.0, 2.0, (6, 6)) * (rng.random((6, 6)) < 0.5)
            a = np.triu(a, 1)
            a = a + a.T
            got = normalize_adjacency(SparseMatrix.from_dense(a, symmetric=True)).to_dense()
            worst = max(worst, float(np.max(np.abs(got - dense_normalize(a)))))
        assert worst <= 1e-12, worst
        d["fixtures"] = len(corpora)
        d["max_norm_err"] = f"{worst:.1e}"


# -- 3, 5, 6 share one trained separable setup -----------------------------------


@pytest.fixture(scope="module")
def separable_run():
    books, taxonomy = separable_corpus(60, seed=0)
    start = time.perf_counter()
    data = prepare(small_config(seed=0), books, taxonomy)
    models = train_models(data)
    return data, models, time.perf_counter() - start


def test_criterion_3_overfit(separable_run):
    with criterion(3, "separable corpus overfits within 300 epochs", budget=300) as d:
        data, models, elapsed = separable_run
        assert all(r.epochs_run <= 300 for r in models.reports.values())
        report = evaluate(data, build_predictor(data, models), data.split.train)
        assert report["level1"]["f1"] == 1.0, report["level1"]
        for branch, m in report["level2"].items():
            assert m["f1_micro"] >= 0.95, (branch, m["f1_micro"])
        d["level1_f1"] = report["level1"]["f1"]
        for branch, m in report["level2"].items():
            d[f"{branch}_f1_micro"] = round(m["f1_micro"], 4)
        d["train_seconds"] = round(elapsed, 1)
        assert elapsed < 300


def test_criterion_5_gating(separable_run):
    with criterion(5, "gated loss ignores wrong-branch labels, one head per book") as d:
        for seed in range(5):
            model, inputs, adj, targets, gate = level2_fixture(seed)
            rows = np.arange(3)
            loss, grads = level2_loss_and_grads(model, inputs, adj, targets, gate, 0.7, rows)
            mutated = targets.copy()
            mutated[gate == 0] = np.random.default_rng(seed).integers(0, 2, mutated[gate == 0].shape)
            mutated[gate == 0, 0] = 1.0 - targets[gate == 0, 0]
            loss2, grads2 = level2_loss_and_grads(model, inputs, adj, mutated, gate, 0.7, rows)
            assert loss == loss2
            assert all(grads[k].tobytes() == grads2[k].tobytes() for k in grads)

        data, models, _ = separable_run
        predictor = build_predictor(data, models)
        ids = [b.id for b in data.books]
        predictions = predictor.predict_many(ids)
        fiction = predictor.scored.get("fiction", [])
        nonfiction = predictor.scored.get("nonfiction", [])
        assert len(fiction) + len(nonfiction) == len(ids)
        assert sorted(fiction + nonfiction) == sorted(ids)
        for p in predictions:
            assert len(p.genres) == len(data.heads[p.level1].genres)
        d["books"] = len(ids)


# -- 6 -----------------------------------------------------------------------


def perturbed(inputs, modality, rng):
    n = inputs.blurb_features.shape[0]
    a = rng.uniform(0.1, 3.0, (n, n)) * (rng.random((n, n)) < 0.3)
    a = np.triu(a, 1)
    adj = normalize_adjacency(SparseMatrix.from_dense(a + a.T, symmetric=True))
    feats = rng.standard_normal(inputs.blurb_features.shape)
    if modality == "review":
        return gcn.DualGraphInputs(inputs.blurb_adj, adj, inputs.blurb_features, feats, inputs.n_docs)
    return gcn.DualGraphInputs(adj, inputs.review_adj, feats, inputs.review_features, inputs.n_docs)


def predictions_bytes(data, models):
    predictor = build_predictor(data, models)
    out = predictor.predict_many([b.id for b in data.books])
    return json.dumps([p.to_dict() for p in out], sort_keys=True).encode()


def test_criterion_6_endpoint_invariance():
    with criterion(6, "lambda endpoints ignore the other modality") as d:
        books, taxonomy = separable_corpus(40, seed=3)
        for lam, modality in ((1.0, "review"), (0.0, "blurb")):
            data = prepare(small_config(lambda1=lam, lambda2=lam, epochs=30), books, taxonomy)
            models = train_models(data)
            before = predictions_bytes(data, models)
            rng = np.random.default_rng(11)
            data.level1_inputs = perturbed(data.level1_inputs, modality, rng)
            for head in data.heads.values():
                head.inputs = perturbed(head.inputs, modality, rng)
            assert predictions_bytes(data, models) == before, f"lambda={lam:g} moved under {modality} perturbation"
        d["books"] = len(books)


# -- 7 -----------------------------------------------------------------------


def test_criterion_7_metric_oracle():
    with criterion(7, "metrics match per-cell brute force exactly") as d:
        keys = ("f1_micro", "f1_macro", "ba_micro", "ba_macro", "hamming_loss")
        for seed in range(100):
            rng = np.random.default_rng(seed)
            pred = (rng.random((20, 8)) < rng.uniform(0.05, 0.7)).astype(int)
            truth = (rng.random((20, 8)) < rng.uniform(0.05, 0.7)).astype(int)
            got = multilabel_metrics(pred, truth)
            want = brute_metrics(pred.tolist(), truth.tolist())
            for key in keys:
                assert got[key] == want[key], (seed, key, got[key], want[key])
        d["matrices"] = 100


# -- 4 -----------------------------------------------------------------------

ABLATION_SEEDS = range(5)
ABLATION_LAMBDAS = {"full": 0.5, "blurb_only": 1.0, "review_only": 0.0}


def ablation_config(seed, lam):
    return small_config(
        seed=seed,
        lambda1=lam,
        lambda2=lam,
        embedding_dim=32,
        gcn1_dim=32,
        learning_rate=0.003,
        epochs=300,
        patience=50,
    )


def branch_score(report):
    return float(np.mean([report["level2"][b]["f1_micro"] for b in ("fiction", "nonfiction")]))


def test_criterion_4_ablation_direction():
    with criterion(4, "full fusion >= blurb-only and review-only on >= 3 of 5 seeds") as d:
        wins = 0
        table = []
        for seed in ABLATION_SEEDS:
            books, taxonomy = noisy_corpus(300, seed=seed)
            scores = {}
            for name, lam in ABLATION_LAMBDAS.items():
                report, _ = run_pipeline(ablation_config(seed, lam), write=False, books=books, taxonomy=taxonomy)
                scores[name] = branch_score(report)
            won = scores["full"] >= max(scores["blurb_only"], scores["review_only"])
            wins += won
            table.append(f"{seed}:" + "/".join(f"{scores[k]:.3f}" for k in ABLATION_LAMBDAS) + ("*" if won else ""))
        d["wins"] = f"{wins}/5"
        d["full/blurb/review"] = " ".join(table)
        assert wins >= 3, f"full model won on {wins}/5 seeds: {' '.join(table)}"


# -- 8 -----------------------------------------------------------------------


def test_criterion_8_determinism(tmp_path):
    with criterion(8, "two runs give bitwise-identical checkpoints and reports") as d:
        books, taxonomy = separable_corpus(60, seed=8)
        files = []
        for name in ("a", "b"):
            cfg = small_config(seed=5, epochs=40, patience=10, output_dir=str(tmp_path / name))
            _, artifacts = run_pipeline(cfg, books=books, taxonomy=taxonomy)
            files.append(artifacts)
        a, b = files
        for key in ("level1", "fiction", "nonfiction", "metrics"):
            with open(a[key], "rb") as fa, open(b[key], "rb") as fb:
                assert fa.read() == fb.read(), key
        d["files"] = 4
