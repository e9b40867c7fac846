"""Command-line driver: build-vocab / train / eval / predict / inspect.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numerical
error. Dataset layout conventions: an agnews --data-dir holds train.csv and
test.csv; a newsgroups --data-dir holds train/ and test/ class directories
(or is itself a class directory tree used for both roles).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointMeta, load_checkpoint, save_checkpoint
from .corpus import Dataset, load_agnews_csv, load_newsgroups_dir
from .errors import (DataError, EmptyDocumentError, NumericalError, ShapeError,
                     TrainError)
from .model import FUSION_MODES, ModelConfig, forward
from .reports import attention_topk, gate_summary
from .textprep import (DEFAULT_STOPWORDS_PATH, load_stopwords,
                       normalize_and_tokenize, remove_stopwords,
                       stopword_hash, strip_newsgroup_noise)
from .tfidf import build_tfidf_vocab, save_vocab
from .training import FeaturePipeline, TrainConfig, evaluate, train

AGNEWS_LABELS = ("World", "Sports", "Business", "Sci/Tech")
DEFAULT_SEMANTIC_VOCAB = 30000
TOP_ATTENTION_K = 5


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="agff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    def data_flags(p):
        p.add_argument("--data-dir", required=True)
        p.add_argument("--format", required=True, choices=["agnews", "newsgroups"])

    p = sub.add_parser("build-vocab", help="build and save a TF-IDF vocabulary")
    data_flags(p)
    p.add_argument("--max-terms", type=int, default=5000)
    p.add_argument("--stopwords", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a model and save a checkpoint")
    data_flags(p)
    p.add_argument("--out", default="model.agff")
    p.add_argument("--mode", default="gated", choices=list(FUSION_MODES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--max-terms", type=int, default=5000)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--stopwords", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--metrics-out", default=None)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--stopwords", default=None)
    p.add_argument("--report-out", default=None)

    p = sub.add_parser("predict", help="classify one text given as a flag")
    p.add_argument("--model", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--stopwords", default=None)

    p = sub.add_parser("inspect", help="fusion-gate statistics over a dataset")
    data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--stopwords", default=None)
    p.add_argument("--report-out", default=None)
    return parser


def _load_dataset(data_dir: str, fmt: str, role: str) -> Dataset:
    root = Path(data_dir)
    if fmt == "agnews":
        return load_agnews_csv(root / f"{role}.csv", AGNEWS_LABELS)
    split_dir = root / role
    return load_newsgroups_dir(split_dir if split_dir.is_dir() else root)


def _stopwords(arg: str | None) -> set[str]:
    return load_stopwords(arg if arg is not None else DEFAULT_STOPWORDS_PATH)


def _checkpoint_pipeline(meta: CheckpointMeta, stopwords_arg: str | None) -> FeaturePipeline:
    stopwords = _stopwords(stopwords_arg)
    if stopword_hash(stopwords) != meta.prep_hash:
        raise DataError("stop list does not match the one this model was trained "
                        "with; pass the original via --stopwords")
    meta.pipeline.stopwords = stopwords
    return meta.pipeline


def _metrics_line(m) -> str:
    # wall-clock seconds intentionally excluded: metrics files must be
    # byte-identical across reruns with the same seed/config/data
    return json.dumps({"epoch": m.epoch, "train_loss": m.train_loss,
                       "train_acc": m.train_acc, "val_acc": m.val_acc})


def _eval_report_dict(report, label_names) -> dict:
    return {
        "accuracy": report.accuracy,
        "label_names": list(label_names),
        "precision": [float(x) for x in report.precision],
        "recall": [float(x) for x in report.recall],
        "confusion": [[int(x) for x in row] for row in report.confusion],
    }


def cmd_build_vocab(args) -> int:
    dataset = _load_dataset(args.data_dir, args.format, "train")
    stopwords = _stopwords(args.stopwords)
    strip = args.format == "newsgroups"
    corpus = []
    for d in dataset.documents:
        text = strip_newsgroup_noise(d.text) if strip else d.text
        corpus.append(remove_stopwords(normalize_and_tokenize(text), stopwords))
    vocab = build_tfidf_vocab(corpus, args.max_terms)
    save_vocab(vocab, args.out)
    print(f"wrote {vocab.size} terms to {args.out}")
    return 0


def cmd_train(args) -> int:
    dataset = _load_dataset(args.data_dir, args.format, "train")
    stopwords = _stopwords(args.stopwords)
    mc = ModelConfig(vocab_size_semantic=DEFAULT_SEMANTIC_VOCAB,
                     num_classes=len(dataset.label_names),
                     tfidf_dim=args.max_terms,
                     fusion_mode=args.mode)
    tc = TrainConfig(model=mc, lr=args.lr, batch_size=args.batch_size,
                     max_epochs=args.epochs, val_fraction=args.val_fraction,
                     seed=args.seed)

    metrics_file = open(args.metrics_out, "w", encoding="utf-8") if args.metrics_out else None

    def on_epoch(m):
        print(f"epoch {m.epoch}: loss {m.train_loss:.4f} "
              f"train_acc {m.train_acc:.4f} val_acc {m.val_acc:.4f} "
              f"({m.seconds:.1f}s)")
        if metrics_file is not None:
            metrics_file.write(_metrics_line(m) + "\n")
            metrics_file.flush()

    try:
        result = train(dataset, tc, stopwords,
                       strip_noise=args.format == "newsgroups",
                       embeddings_path=args.embeddings,
                       epoch_callback=on_epoch)
    finally:
        if metrics_file is not None:
            metrics_file.close()

    meta = CheckpointMeta(config=result.config, label_names=result.label_names,
                          prep_hash=stopword_hash(stopwords),
                          pipeline=result.pipeline)
    save_checkpoint(result.params, meta, args.out)
    best = result.history[result.best_epoch]
    print(f"saved {args.out} (best epoch {best.epoch}, val_acc {best.val_acc:.4f})")
    return 0


def cmd_eval(args) -> int:
    params, meta = load_checkpoint(args.model)
    dataset = _load_dataset(args.data_dir, args.format, "test")
    if len(dataset.label_names) != meta.config.num_classes:
        raise DataError(f"dataset has {len(dataset.label_names)} classes but the "
                        f"model was trained with {meta.config.num_classes}")
    if tuple(dataset.label_names) != tuple(meta.label_names):
        raise DataError(f"dataset classes {list(dataset.label_names)} do not match "
                        f"the model's {list(meta.label_names)}")
    pipeline = _checkpoint_pipeline(meta, args.stopwords)
    report = evaluate(params, meta.config, pipeline, dataset)
    print(f"accuracy {report.accuracy:.4f} on {int(report.confusion.sum())} documents")
    if args.report_out:
        Path(args.report_out).write_text(
            json.dumps(_eval_report_dict(report, dataset.label_names), indent=2),
            encoding="utf-8")
    return 0


def cmd_predict(args) -> int:
    params, meta = load_checkpoint(args.model)
    pipeline = _checkpoint_pipeline(meta, args.stopwords)
    prepared = pipeline.prepare_text(args.text, meta.config.max_seq_len)
    trace, _ = forward(params, meta.config, prepared.ids, prepared.tfidf)
    label = int(np.argmax(trace.probs))
    out = {
        "label_name": meta.label_names[label],
        "probs": {name: float(p) for name, p in zip(meta.label_names, trace.probs)},
        "top_attention": [[tok, w] for tok, w in
                          attention_topk(trace, prepared.tokens, TOP_ATTENTION_K)],
    }
    print(json.dumps(out))
    return 0


def cmd_inspect(args) -> int:
    params, meta = load_checkpoint(args.model)
    dataset = _load_dataset(args.data_dir, args.format, "test")
    pipeline = _checkpoint_pipeline(meta, args.stopwords)
    report = gate_summary(params, meta.config, pipeline, dataset)
    payload = report.to_dict()
    print(f"global mean gate {report.global_mean:.4f} over {report.count} documents")
    for name, stats in payload["per_class"].items():
        print(f"  {name}: mean {stats['mean_gate']:.4f} (n={stats['count']})")
    if args.report_out:
        Path(args.report_out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return 0


_COMMANDS = {
    "build-vocab": cmd_build_vocab,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "inspect": cmd_inspect,
}


def cli_dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (DataError, TrainError, ShapeError, EmptyDocumentError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
