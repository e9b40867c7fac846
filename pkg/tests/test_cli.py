import csv
import json

import pytest

from agff.cli import cli_dispatch

from corpusgen import keyword_corpus


def write_agnews_csv(path, dataset):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, quoting=csv.QUOTE_ALL)
        for doc in dataset.documents:
            words = doc.text.split()
            title = " ".join(words[: len(words) // 2]) or "untitled"
            desc = " ".join(words[len(words) // 2:]) or "empty"
            writer.writerow([doc.label + 1, title, desc])


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("agdata")
    train = keyword_corpus(48, 4, seed=11, doc_len=12)
    test = keyword_corpus(20, 4, seed=12, doc_len=12)
    write_agnews_csv(root / "train.csv", train)
    write_agnews_csv(root / "test.csv", test)
    return root


@pytest.fixture(scope="module")
def trained_model(data_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "m.agff"
    metrics = out.with_suffix(".jsonl")
    code = cli_dispatch([
        "train", "--data-dir", str(data_dir), "--format", "agnews",
        "--out", str(out), "--mode", "gated", "--seed", "7",
        "--epochs", "2", "--batch-size", "16", "--max-terms", "300",
        "--val-fraction", "0.25", "--metrics-out", str(metrics)])
    assert code == 0
    return out, metrics


def test_build_vocab(data_dir, tmp_path):
    out = tmp_path / "vocab.json"
    code = cli_dispatch(["build-vocab", "--data-dir", str(data_dir),
                         "--format", "agnews", "--max-terms", "50",
                         "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["num_docs"] == 48
    assert 0 < len(payload["terms"]) <= 50


def test_train_writes_checkpoint_and_metrics(trained_model):
    out, metrics = trained_model
    assert out.exists()
    lines = metrics.read_text().strip().split("\n")
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert set(first) == {"epoch", "train_loss", "train_acc", "val_acc"}


def test_train_metrics_deterministic(data_dir, tmp_path):
    files = []
    for run in ("a", "b"):
        out = tmp_path / f"{run}.agff"
        metrics = tmp_path / f"{run}.jsonl"
        code = cli_dispatch([
            "train", "--data-dir", str(data_dir), "--format", "agnews",
            "--out", str(out), "--mode", "gated", "--seed", "3",
            "--epochs", "2", "--batch-size", "16", "--max-terms", "300",
            "--metrics-out", str(metrics)])
        assert code == 0
        files.append(metrics.read_bytes())
    assert files[0] == files[1]


def test_eval_reports_accuracy(trained_model, data_dir, tmp_path, capsys):
    out, _ = trained_model
    report = tmp_path / "report.json"
    code = cli_dispatch(["eval", "--data-dir", str(data_dir), "--format", "agnews",
                         "--model", str(out), "--report-out", str(report)])
    assert code == 0
    assert "accuracy" in capsys.readouterr().out
    payload = json.loads(report.read_text())
    assert set(payload) == {"accuracy", "label_names", "precision", "recall", "confusion"}
    assert len(payload["confusion"]) == 4


def test_eval_label_count_mismatch_exits_2(trained_model, tmp_path):
    out, _ = trained_model
    other = tmp_path / "two_class"
    other.mkdir()
    ds = keyword_corpus(12, 2, seed=5)
    # newsgroups layout with only 2 classes vs a 4-class checkpoint
    for doc in ds.documents:
        d = other / f"c{doc.label}"
        d.mkdir(exist_ok=True)
        (d / f"{doc.id}.txt").write_text(doc.text, encoding="utf-8")
    code = cli_dispatch(["eval", "--data-dir", str(other), "--format", "newsgroups",
                         "--model", str(out)])
    assert code == 2


def test_predict_json_contract(trained_model, capsys):
    out, _ = trained_model
    code = cli_dispatch(["predict", "--model", str(out),
                         "--text", "key0x0 key0x1 filler2 filler3"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out.strip())
    assert set(payload) == {"label_name", "probs", "top_attention"}
    assert payload["label_name"] in {"World", "Sports", "Business", "Sci/Tech"}
    assert len(payload["probs"]) == 4
    assert abs(sum(payload["probs"].values()) - 1.0) < 1e-9
    assert 1 <= len(payload["top_attention"]) <= 5


def test_inspect_gate_report(trained_model, data_dir, tmp_path):
    out, _ = trained_model
    report = tmp_path / "gates.json"
    code = cli_dispatch(["inspect", "--data-dir", str(data_dir), "--format", "agnews",
                         "--model", str(out), "--report-out", str(report)])
    assert code == 0
    payload = json.loads(report.read_text())
    assert 0.0 < payload["global_mean"] < 1.0
    assert payload["count"] == 20
    for stats in payload["per_class"].values():
        assert sum(stats["histogram"]) == stats["count"]


def test_newsgroups_roundtrip_with_header_stripping(tmp_path, capsys):
    root = tmp_path / "ng"
    for role, seed, count in (("train", 21, 40), ("test", 22, 12)):
        ds = keyword_corpus(count, 2, seed=seed, doc_len=12)
        for doc in ds.documents:
            cdir = root / role / f"group{doc.label}"
            cdir.mkdir(parents=True, exist_ok=True)
            body = f"From: x@y\nSubject: hi\n\n{doc.text}\n> quoted junk\n"
            (cdir / f"{doc.id}.txt").write_text(body, encoding="utf-8")
    model = tmp_path / "ng.agff"
    code = cli_dispatch([
        "train", "--data-dir", str(root), "--format", "newsgroups",
        "--out", str(model), "--seed", "2", "--epochs", "2",
        "--batch-size", "8", "--max-terms", "200", "--val-fraction", "0.2"])
    assert code == 0
    code = cli_dispatch(["eval", "--data-dir", str(root), "--format", "newsgroups",
                         "--model", str(model)])
    assert code == 0
    assert "accuracy" in capsys.readouterr().out


def test_train_with_pretrained_embeddings(data_dir, tmp_path):
    vectors = tmp_path / "vectors.txt"
    dim = 64  # must match the model's embedding width
    rows = []
    for i, word in enumerate(["key0x0", "key1x0", "filler0", "filler1"]):
        values = " ".join(f"{0.01 * (i + 1):.4f}" for _ in range(dim))
        rows.append(f"{word} {values}")
    vectors.write_text("\n".join(rows) + "\n", encoding="utf-8")
    out = tmp_path / "emb.agff"
    code = cli_dispatch([
        "train", "--data-dir", str(data_dir), "--format", "agnews",
        "--out", str(out), "--seed", "1", "--epochs", "1",
        "--batch-size", "16", "--max-terms", "300",
        "--embeddings", str(vectors)])
    assert code == 0 and out.exists()


def test_unknown_subcommand_exits_1(capsys):
    assert cli_dispatch(["frobnicate"]) == 1
    assert cli_dispatch(["train", "--nonsense-flag", "x"]) == 1
    capsys.readouterr()


def test_missing_data_exits_2(tmp_path):
    code = cli_dispatch(["build-vocab", "--data-dir", str(tmp_path / "nope"),
                         "--format", "agnews", "--out", str(tmp_path / "v.json")])
    assert code == 2


def test_eval_renamed_classes_exits_2(trained_model, tmp_path):
    out, _ = trained_model
    root = tmp_path / "renamed"
    ds = keyword_corpus(16, 4, seed=9)
    for doc in ds.documents:
        cdir = root / "test" / f"othername{doc.label}"
        cdir.mkdir(parents=True, exist_ok=True)
        (cdir / f"{doc.id}.txt").write_text(doc.text, encoding="utf-8")
    code = cli_dispatch(["eval", "--data-dir", str(root), "--format", "newsgroups",
                         "--model", str(out)])
    assert code == 2  # four classes, but names differ from the checkpoint


def test_missing_stopword_file_exits_2(trained_model, tmp_path):
    out, _ = trained_model
    code = cli_dispatch(["predict", "--model", str(out), "--text", "hello",
                         "--stopwords", str(tmp_path / "absent.txt")])
    assert code == 2


def test_predict_with_wrong_stopword_list_exits_2(trained_model, tmp_path):
    out, _ = trained_model
    other = tmp_path / "stop.txt"
    other.write_text("completely\ndifferent\nwords\n", encoding="utf-8")
    code = cli_dispatch(["predict", "--model", str(out), "--text", "hello",
                         "--stopwords", str(other)])
    assert code == 2
