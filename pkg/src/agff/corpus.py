"""Labeled news corpus loading, stratified splitting, and embedding files."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError, RowFormatError, StratifyError
from .rng import Rng


@dataclass(frozen=True)
class Document:
    id: str
    label: int
    text: str


@dataclass(frozen=True)
class Dataset:
    documents: tuple[Document, ...]
    label_names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.label_names)) != len(self.label_names):
            raise ValueError("duplicate label names")
        for d in self.documents:
            if not 0 <= d.label < len(self.label_names):
                raise ValueError(f"document {d.id}: label {d.label} out of range")

    def __len__(self) -> int:
        return len(self.documents)


@dataclass
class EmbeddingTable:
    dim: int
    rows: dict[int, np.ndarray] = field(default_factory=dict)
    unk_row: np.ndarray | None = None


def load_agnews_csv(path: str | Path, label_names: tuple[str, str, str, str],
                    keep_empty: bool = False) -> Dataset:
    """CSV rows of (class index 1..4, title, description); text joins the two
    fields with ". " and labels shift to 0-based. Rows whose title and
    description are both blank are dropped unless keep_empty is set."""
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no such file: {path}")
    docs = []
    with open(path, newline="", encoding="utf-8", errors="replace") as f:
        for rownum, row in enumerate(csv.reader(f), start=1):
            if len(row) != 3:
                raise RowFormatError(f"expected 3 fields, got {len(row)}", row=rownum)
            cls, title, desc = row
            try:
                label = int(cls)
            except ValueError:
                raise RowFormatError(f"class index not an integer: {cls!r}", row=rownum)
            if not 1 <= label <= len(label_names):
                raise RowFormatError(f"class index {label} out of range 1..{len(label_names)}", row=rownum)
            if not (title + desc).strip() and not keep_empty:
                continue
            docs.append(Document(id=str(rownum), label=label - 1, text=f"{title}. {desc}"))
    return Dataset(documents=tuple(docs), label_names=tuple(label_names))


def load_newsgroups_dir(path: str | Path, keep_empty: bool = False) -> Dataset:
    """Directory of class subdirectories, one document file per post.

    Class names sort lexicographically for stable label indices; files are
    decoded leniently (bad bytes replaced) since the corpus contains
    non-UTF-8 bytes. Empty files are dropped unless keep_empty is set.
    """
    path = Path(path)
    if not path.is_dir():
        raise IoError(f"no such directory: {path}")
    class_dirs = sorted(p for p in path.iterdir() if p.is_dir())
    if not class_dirs:
        raise IoError(f"no class subdirectories in {path}")
    docs = []
    label_names = tuple(p.name for p in class_dirs)
    for label, cdir in enumerate(class_dirs):
        for fpath in sorted(p for p in cdir.iterdir() if p.is_file()):
            try:
                raw = fpath.read_bytes()
            except OSError as e:
                raise IoError(f"unreadable file {fpath}: {e}")
            text = raw.decode("utf-8", errors="replace")
            if not text.strip() and not keep_empty:
                continue
            docs.append(Document(id=f"{cdir.name}/{fpath.name}", label=label, text=text))
    return Dataset(documents=tuple(docs), label_names=label_names)


def stratified_split(dataset: Dataset, val_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Per class, round(n * val_fraction) documents (at least 1, at most n-1)
    move to the validation set, chosen by seeded shuffle. Document order
    within each side follows the original dataset order."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must be in (0,1), got {val_fraction}")
    by_class: dict[int, list[int]] = {}
    for i, doc in enumerate(dataset.documents):
        by_class.setdefault(doc.label, []).append(i)
    rng = Rng(seed)
    val_idx: set[int] = set()
    for label in sorted(by_class):
        members = by_class[label]
        n = len(members)
        if n < 2:
            raise StratifyError(
                f"class {dataset.label_names[label]!r} has {n} document(s); need >= 2 to split")
        take = int(math.floor(n * val_fraction + 0.5))  # half-up rounding
        take = max(1, min(n - 1, take))
        order = rng.permutation(n)
        val_idx.update(members[j] for j in order[:take])
    train_docs = tuple(d for i, d in enumerate(dataset.documents) if i not in val_idx)
    val_docs = tuple(d for i, d in enumerate(dataset.documents) if i in val_idx)
    return (Dataset(train_docs, dataset.label_names),
            Dataset(val_docs, dataset.label_names))


def load_embedding_text(path: str | Path, vocab: dict[str, int], dim: int) -> EmbeddingTable:
    """Plain-text embeddings, `word v1 .. v_dim` per line, no header.

    Only words present in `vocab` are kept; the unknown-word row is the mean
    of the kept rows (zero vector if nothing matched).
    """
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no such file: {path}")
    table = EmbeddingTable(dim=dim)
    loaded = []
    with open(path, encoding="utf-8", errors="replace") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != dim:
                raise FormatError(f"line {lineno}: expected {dim} values, got {len(values)}")
            if word not in vocab:
                continue
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise FormatError(f"line {lineno}: non-numeric value")
            table.rows[vocab[word]] = vec
            loaded.append(vec)
    table.unk_row = (np.mean(loaded, axis=0) if loaded
                     else np.zeros(dim, dtype=np.float64))
    return table
