import json

import pytest

from higemine.cli import main
from higemine.corpus import save_dataset
from higemine.synthetic import separable_corpus

CONFIG = """\
dataset: books.jsonl
taxonomy: taxonomy.json
output_dir: out
embedding_dim: 16
gcn1_dim: 16
gcn2_dim: 16
dense_hidden: 16
label_out_dim: 16
learning_rate: 0.01
window: 10
epochs: 40
patience: 0
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    books, taxonomy = separable_corpus(40, seed=6)
    save_dataset(books, root / "books.jsonl", taxonomy)
    (root / "taxonomy.json").write_text(json.dumps(taxonomy.to_dict()))
    (root / "config.yaml").write_text(CONFIG)
    return root, books


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_filter_writes_sidecar(workspace, capsys):
    root, books = workspace
    code, out = run(capsys, "filter", "--config", str(root / "config.yaml"))
    assert code == 0
    summary = json.loads(out)
    assert summary["books"] == len(books)
    lines = (root / "out" / "filter.jsonl").read_text().splitlines()
    assert len(lines) == len(books)
    assert (root / "out" / "vocab.txt").exists()


def test_graph_stats_and_dump(workspace, capsys, tmp_path):
    root, _ = workspace
    code, out = run(capsys, "graph-stats", "--config", str(root / "config.yaml"), "--dump", str(tmp_path / "d"))
    assert code == 0
    stats = json.loads(out)
    assert set(stats) >= {"blurb", "review", "label"}
    assert (tmp_path / "d" / "blurb_graph.mtx").read_text().startswith("%%MatrixMarket")


def test_train_eval_predict(workspace, capsys):
    root, books = workspace
    cfg = str(root / "config.yaml")
    code, out = run(capsys, "train", "--config", cfg)
    assert code == 0
    assert set(json.loads(out)["checkpoints"]) == {"level1", "fiction", "nonfiction"}

    code, out = run(capsys, "eval", "--config", cfg, "--split", "val")
    assert code == 0
    report = json.loads(out)
    assert report["counts"]["evaluated"] == report["counts"]["val"]
    assert (root / "out" / "metrics_val.json").exists()

    one = root / "one.json"
    one.write_text(json.dumps({"id": books[0].id}))
    code, out = run(capsys, "predict", "--config", cfg, "--input", str(one))
    assert code == 0
    pred = json.loads(out)
    assert pred["id"] == books[0].id and pred["level1"] in ("fiction", "nonfiction")

    many = root / "many.jsonl"
    many.write_text("\n".join(json.dumps({"id": b.id}) for b in books[:3]))
    code, out = run(capsys, "predict", "--config", cfg, "--input", str(many), "--batch")
    assert code == 0
    assert [json.loads(line)["id"] for line in out.splitlines()] == [b.id for b in books[:3]]

    missing = root / "missing.json"
    missing.write_text(json.dumps({"id": "nope"}))
    assert main(["predict", "--config", cfg, "--input", str(missing)]) == 3


def test_eval_without_checkpoints(workspace, tmp_path):
    root, _ = workspace
    cfg = tmp_path / "c.yaml"
    cfg.write_text(CONFIG.replace("books.jsonl", str(root / "books.jsonl")).replace("taxonomy.json", str(root / "taxonomy.json")))
    assert main(["eval", "--config", str(cfg)]) == 3


def test_config_errors(workspace, tmp_path):
    root, _ = workspace
    bad = tmp_path / "bad.yaml"
    bad.write_text(CONFIG + "mystery_knob: 3\n")
    assert main(["filter", "--config", str(bad)]) == 2
    assert main(["filter", "--config", str(tmp_path / "absent.yaml")]) == 2
    bad.write_text(CONFIG.replace("window: 10", "window: 1"))
    assert main(["filter", "--config", str(bad)]) == 2


def test_data_error_exit_code(workspace, tmp_path):
    root, _ = workspace
    (tmp_path / "books.jsonl").write_text('{"id": "x", "level1": "poetry", "level2": ["a"]}\n')
    (tmp_path / "taxonomy.json").write_text((root / "taxonomy.json").read_text())
    (tmp_path / "config.yaml").write_text(CONFIG)
    assert main(["filter", "--config", str(tmp_path / "config.yaml")]) == 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_failure_exit_code(workspace, tmp_path):
    root, _ = workspace
    text = CONFIG.replace("books.jsonl", str(root / "books.jsonl")).replace("taxonomy.json", str(root / "taxonomy.json"))
    text = text.replace("learning_rate: 0.01", "learning_rate: 1e300")
    (tmp_path / "c.yaml").write_text(text)
    assert main(["train", "--config", str(tmp_path / "c.yaml"), "--level", "1"]) == 4
