"""Command-line entry point: ``higemine <command> --config <file>``.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .corpus import book_from_dict
from .errors import ConfigError, DataError, HigemineError

log = logging.getLogger("higemine")

LEVEL_CHOICES = {"1": ("1",), "2f": ("2f",), "2nf": ("2nf",), "all": ("1", "2f", "2nf")}


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_filter(args, cfg):
    from .pipeline import prepare, write_preparation

    data = prepare(cfg)
    out = write_preparation(data, cfg.output_dir)
    kept = sum(len(r.kept_indices) for r in data.filtered.values())
    total = sum(len(b.reviews) for b in data.books)
    _emit({"books": len(data.books), "reviews": total, "kept": kept, "vocabulary": len(data.vocab), **out})


def cmd_train(args, cfg):
    from .pipeline import _write_json, prepare, save_models, train_models, write_preparation

    data = prepare(cfg)
    levels = LEVEL_CHOICES[args.level]
    if not cfg.hierarchy:
        levels = ("flat",)
    models = train_models(data, levels)
    write_preparation(data, cfg.output_dir)
    written = save_models(data, models, cfg.output_dir)
    report_path = Path(cfg.output_dir) / "train_report.json"
    _write_json(report_path, {k: r.to_dict() for k, r in models.reports.items()})
    _emit({"checkpoints": written, "train_report": str(report_path)})


def cmd_eval(args, cfg):
    from .pipeline import _write_json, build_predictor, evaluate, load_models, prepare

    data = prepare(cfg)
    models = load_models(data, cfg.output_dir)
    ids = {"test": data.split.test, "val": data.split.val, "train": data.split.train}[args.split]
    report = evaluate(data, build_predictor(data, models), ids)
    path = Path(cfg.output_dir) / f"metrics_{args.split}.json"
    _write_json(path, report)
    _emit(report)


def cmd_run(args, cfg):
    from .pipeline import run_pipeline

    report, artifacts = run_pipeline(cfg)
    _emit({"metrics": report, "artifacts": artifacts})


def _read_books(path):
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        return []
    try:
        obj = json.loads(text)
        return obj if isinstance(obj, list) else [obj]
    except json.JSONDecodeError:
        try:
            return [json.loads(line) for line in text.splitlines() if line.strip()]
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed JSON input: {exc.msg}") from exc


def cmd_predict(args, cfg):
    from .pipeline import build_predictor, load_models, prepare

    data = prepare(cfg)
    predictor = build_predictor(data, load_models(data, cfg.output_dir))
    out = []
    for obj in _read_books(args.input):
        book_id = obj.get("id") if isinstance(obj, dict) else None
        if book_id is None:
            raise DataError("each input book needs an 'id'")
        if "level1" in obj:
            book_from_dict(obj, data.taxonomy, str(args.input))
        out.append(predictor.predict(str(book_id)).to_dict())
    if args.batch or len(out) != 1:
        for item in out:
            sys.stdout.write(json.dumps(item, sort_keys=True) + "\n")
    else:
        _emit(out[0])


def cmd_graph_stats(args, cfg):
    from .pipeline import prepare

    data = prepare(cfg)
    stats = {
        "blurb": data.blurb_graph.stats(),
        "review": data.review_graph.stats(),
        "label": {name: {"labels": len(h.genres), "edges": h.label_adj.nnz - len(h.genres)} for name, h in data.heads.items()},
    }
    if args.dump:
        dump = Path(args.dump)
        dump.mkdir(parents=True, exist_ok=True)
        (dump / "blurb_graph.mtx").write_text(data.blurb_graph.adjacency.to_matrix_market())
        (dump / "review_graph.mtx").write_text(data.review_graph.adjacency.to_matrix_market())
        stats["dumped_to"] = str(dump)
    _emit(stats)


def build_parser():
    parser = argparse.ArgumentParser(prog="higemine", description="Hierarchical book-genre mining")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.set_defaults(fn=fn)
        return p

    p = add("train", cmd_train, "train Level-1 and/or Level-2 heads")
    p.add_argument("--level", choices=sorted(LEVEL_CHOICES), default="all")
    p = add("predict", cmd_predict, "predict genres for books present in the dataset")
    p.add_argument("--input", required=True, help="JSON book, JSON list, or JSONL")
    p.add_argument("--batch", action="store_true", help="emit JSONL even for one book")
    add("filter", cmd_filter, "filter reviews and write the JSONL sidecar")
    p = add("eval", cmd_eval, "evaluate saved checkpoints")
    p.add_argument("--split", choices=("test", "val", "train"), default="test")
    p = add("graph-stats", cmd_graph_stats, "node/edge counts and weight histograms")
    p.add_argument("--dump", help="directory for Matrix Market dumps")
    add("run", cmd_run, "full pipeline: train everything and evaluate on the test split")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        args.fn(args, cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except HigemineError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except FileNotFoundError as exc:
        log.error("data error: %s", exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
