"""End-to-end exercise of the ablation harness on a small surrogate corpus.

Checks machinery (subsetting, parallel runs, report shape, checkpoint
reload), not benchmark ordering: the surrogate's class signal is mostly
lexical, so no cross-mode accuracy ordering is asserted here.
"""

import json

import pytest

from agff.checkpoint import load_checkpoint
from agff.corpus import load_agnews_csv
from agff.textprep import load_stopwords
from agff.training import evaluate

from make_surrogate_corpus import make_rows, write_csv
from run_ablation import SUBSET_SEED, run_ablation, stratified_subset
from agff.cli import AGNEWS_LABELS


@pytest.fixture(scope="module")
def surrogate_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("surrogate")
    write_csv(root / "train.csv", make_rows(1600, seed=100))
    write_csv(root / "test.csv", make_rows(480, seed=101))
    return root


def test_stratified_subset_is_balanced_and_deterministic(surrogate_dir):
    ds = load_agnews_csv(surrogate_dir / "train.csv", AGNEWS_LABELS)
    sub_a = stratified_subset(ds, 400, seed=9)
    sub_b = stratified_subset(ds, 400, seed=9)
    assert sub_a == sub_b
    assert len(sub_a) == 400
    for c in range(4):
        assert sum(1 for d in sub_a.documents if d.label == c) == 100


def test_small_ablation_run(surrogate_dir, tmp_path):
    report = run_ablation(
        surrogate_dir / "train.csv", surrogate_dir / "test.csv",
        seeds=(0,), modes=("gated", "tfidf_only"),
        train_size=1200, test_size=400, epochs=3,
        embed_dim=32, hidden=32, max_terms=2000, semantic_vocab=4000,
        ckpt_dir=str(tmp_path), jobs=2, log=lambda *_: None)

    assert {r["mode"] for r in report["runs"]} == {"gated", "tfidf_only"}
    gated = next(r for r in report["runs"] if r["mode"] == "gated")
    assert gated["test_accuracy"] >= 0.80  # the corpus is deliberately easy
    assert report["mean_accuracy"]["gated"] == gated["test_accuracy"]

    # checkpoint written by the worker reloads and reproduces the accuracy
    params, meta = load_checkpoint(gated["checkpoint"])
    meta.pipeline.stopwords = load_stopwords()
    full_test = load_agnews_csv(surrogate_dir / "test.csv", AGNEWS_LABELS)
    test_ds = stratified_subset(full_test, 400, SUBSET_SEED + 1)
    reloaded = evaluate(params, meta.config, meta.pipeline, test_ds)
    assert abs(reloaded.accuracy - gated["test_accuracy"]) <= 0.001

    payload = json.dumps(report)
    assert "mean_accuracy" in payload
