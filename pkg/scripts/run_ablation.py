#!/usr/bin/env python3
"""Desk-scale fusion ablation: train gated / concat / semantic_only /
tfidf_only on a stratified AG-News-format subset over several seeds, then
compare mean test accuracy.

Runs are independent and fully seeded, so they can execute in parallel
worker processes without affecting results. Writes a JSON report and one
checkpoint per run.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing as mp
import os
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from agff.checkpoint import CheckpointMeta, save_checkpoint
from agff.cli import AGNEWS_LABELS
from agff.corpus import Dataset, load_agnews_csv
from agff.model import ModelConfig
from agff.rng import Rng
from agff.textprep import load_stopwords, stopword_hash
from agff.training import TrainConfig, evaluate, train

MODES = ("gated", "concat", "semantic_only", "tfidf_only")
SUBSET_SEED = 20240  # fixed: the subset is part of the experiment definition


def _limit_blas_threads():
    # the model's matrices are small; BLAS threading only adds sync overhead
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=1)
    except ImportError:
        pass


def stratified_subset(dataset: Dataset, total: int, seed: int) -> Dataset:
    """Seeded per-class subsample, equal counts per class, original order."""
    per_class = total // len(dataset.label_names)
    by_class: dict[int, list[int]] = {}
    for i, doc in enumerate(dataset.documents):
        by_class.setdefault(doc.label, []).append(i)
    rng = Rng(seed)
    chosen: list[int] = []
    for label in sorted(by_class):
        members = by_class[label]
        if len(members) < per_class:
            raise ValueError(f"class {label} has only {len(members)} docs, need {per_class}")
        order = rng.permutation(len(members))
        chosen.extend(members[j] for j in order[:per_class])
    chosen.sort()
    return Dataset(tuple(dataset.documents[i] for i in chosen), dataset.label_names)


def run_single(task: dict) -> dict:
    """Train one (mode, seed) combination and measure test accuracy."""
    t0 = time.perf_counter()
    train_ds: Dataset = task["train_ds"]
    test_ds: Dataset = task["test_ds"]
    stopwords = load_stopwords()
    mc = ModelConfig(vocab_size_semantic=task["semantic_vocab"],
                     num_classes=len(train_ds.label_names),
                     embed_dim=task["embed_dim"],
                     hidden_per_dir=task["hidden"],
                     tfidf_dim=task["max_terms"],
                     fusion_mode=task["mode"])
    tc = TrainConfig(model=mc, max_epochs=task["epochs"], seed=task["seed"])
    result = train(train_ds, tc, stopwords)
    report = evaluate(result.params, result.config, result.pipeline, test_ds)

    ckpt_path = None
    if task.get("ckpt_dir"):
        Path(task["ckpt_dir"]).mkdir(parents=True, exist_ok=True)
        ckpt_path = str(Path(task["ckpt_dir"]) /
                        f"ckpt_{task['mode']}_{task['seed']}.agff")
        meta = CheckpointMeta(config=result.config,
                              label_names=result.label_names,
                              prep_hash=stopword_hash(stopwords),
                              pipeline=result.pipeline)
        save_checkpoint(result.params, meta, ckpt_path)

    return {
        "mode": task["mode"],
        "seed": task["seed"],
        "test_accuracy": report.accuracy,
        "best_epoch": result.history[result.best_epoch].epoch,
        "epochs_run": len(result.history),
        "best_val_acc": result.history[result.best_epoch].val_acc,
        "seconds": round(time.perf_counter() - t0, 1),
        "checkpoint": ckpt_path,
    }


def run_ablation(train_csv, test_csv, *, seeds=(0, 1, 2), modes=MODES,
                 train_size=8000, test_size=2000, epochs=10, embed_dim=64,
                 hidden=64, max_terms=5000, semantic_vocab=30000,
                 ckpt_dir=None, jobs=None, log=print) -> dict:
    full_train = load_agnews_csv(train_csv, AGNEWS_LABELS)
    full_test = load_agnews_csv(test_csv, AGNEWS_LABELS)
    train_ds = stratified_subset(full_train, train_size, SUBSET_SEED)
    test_ds = stratified_subset(full_test, test_size, SUBSET_SEED + 1)
    log(f"subset: {len(train_ds)} train / {len(test_ds)} test documents")

    tasks = [{"mode": mode, "seed": seed, "train_ds": train_ds,
              "test_ds": test_ds, "epochs": epochs, "embed_dim": embed_dim,
              "hidden": hidden, "max_terms": max_terms,
              "semantic_vocab": semantic_vocab, "ckpt_dir": ckpt_dir}
             for mode in modes for seed in seeds]

    jobs = jobs or min(len(tasks), os.cpu_count() or 1)
    if jobs > 1:
        with mp.get_context("fork").Pool(jobs, initializer=_limit_blas_threads) as pool:
            runs = pool.map(run_single, tasks)
    else:
        _limit_blas_threads()
        runs = [run_single(t) for t in tasks]
    for r in runs:
        log(f"  {r['mode']:14s} seed {r['seed']}: acc {r['test_accuracy']:.4f} "
            f"({r['epochs_run']} epochs, {r['seconds']}s)")

    means = {mode: sum(r["test_accuracy"] for r in runs if r["mode"] == mode)
             / len(seeds) for mode in modes}
    report = {
        "train_size": train_size, "test_size": test_size,
        "subset_seed": SUBSET_SEED, "seeds": list(seeds),
        "config": {"embed_dim": embed_dim, "hidden": hidden,
                   "max_terms": max_terms, "epochs": epochs},
        "runs": runs,
        "mean_accuracy": means,
    }
    if set(modes) == set(MODES):
        report["checks"] = {
            "gated_ge_semantic": means["gated"] >= means["semantic_only"],
            "gated_ge_tfidf": means["gated"] >= means["tfidf_only"],
            "gated_ge_concat_minus_half_point": means["gated"] >= means["concat"] - 0.005,
            "gated_ge_80pct": means["gated"] >= 0.80,
        }
    return report


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", required=True,
                        help="directory holding train.csv and test.csv")
    parser.add_argument("--out", default="ablation_report.json")
    parser.add_argument("--ckpt-dir", default=None)
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--train-size", type=int, default=8000)
    parser.add_argument("--test-size", type=int, default=2000)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--jobs", type=int, default=None)
    args = parser.parse_args()

    root = Path(args.data_dir)
    report = run_ablation(root / "train.csv", root / "test.csv",
                          seeds=tuple(int(s) for s in args.seeds.split(",")),
                          train_size=args.train_size, test_size=args.test_size,
                          epochs=args.epochs, ckpt_dir=args.ckpt_dir,
                          jobs=args.jobs)
    Path(args.out).write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(json.dumps(report["mean_accuracy"], indent=2))
    if "checks" in report:
        print(json.dumps(report["checks"], indent=2))
    print(f"report written to {args.out}")


if __name__ == "__main__":
    main()
