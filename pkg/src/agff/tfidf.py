"""Bounded TF-IDF vocabulary and sparse per-document feature vectors.

TF is the raw in-document count; IDF is the smoothed form
ln((1+N)/(1+df)) + 1. Vectors are L2-normalized unless entirely
out-of-vocabulary (then left as the zero vector).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BuildError, FormatError


@dataclass
class TfidfVocabulary:
    term_index: dict[str, int]
    doc_freq: np.ndarray   # int64, index-aligned
    idf: np.ndarray        # float64, index-aligned
    num_docs: int

    @property
    def size(self) -> int:
        return len(self.term_index)


@dataclass
class SparseVector:
    dim: int
    indices: np.ndarray  # int64, strictly increasing
    values: np.ndarray   # float64

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


def _idf(num_docs: int, df: np.ndarray) -> np.ndarray:
    return np.log((1.0 + num_docs) / (1.0 + df)) + 1.0


def build_tfidf_vocab(corpus: list[list[str]], max_terms: int) -> TfidfVocabulary:
    """Rank terms by document frequency (descending, ties lexicographic
    ascending), keep the top max_terms, assign indices in rank order."""
    if not corpus:
        raise BuildError("cannot build a vocabulary from an empty corpus")
    if max_terms < 1:
        raise ValueError(f"max_terms must be >= 1, got {max_terms}")
    df_counts: Counter[str] = Counter()
    for tokens in corpus:
        df_counts.update(set(tokens))
    ranked = sorted(df_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_terms]
    term_index = {term: i for i, (term, _) in enumerate(ranked)}
    df = np.array([c for _, c in ranked], dtype=np.int64)
    n = len(corpus)
    return TfidfVocabulary(term_index=term_index, doc_freq=df,
                           idf=_idf(n, df), num_docs=n)


def compute_tfidf(tokens: list[str], vocab: TfidfVocabulary) -> SparseVector:
    """count(term) * idf per in-vocab term, then L2-normalized."""
    counts: dict[int, int] = {}
    term_index = vocab.term_index
    for t in tokens:
        j = term_index.get(t)
        if j is not None:
            counts[j] = counts.get(j, 0) + 1
    if not counts:
        return SparseVector(dim=vocab.size,
                            indices=np.empty(0, dtype=np.int64),
                            values=np.empty(0, dtype=np.float64))
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[j] for j in indices], dtype=np.float64) * vocab.idf[indices]
    values /= math.sqrt(float(np.dot(values, values)))
    return SparseVector(dim=vocab.size, indices=indices, values=values)


def save_vocab(vocab: TfidfVocabulary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(vocab_to_dict(vocab)), encoding="utf-8")


def load_vocab(path: str | Path) -> TfidfVocabulary:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"cannot read vocabulary {path}: {e}")
    return vocab_from_dict(payload)


def vocab_to_dict(vocab: TfidfVocabulary) -> dict:
    return {
        "num_docs": vocab.num_docs,
        "terms": [{"t": term, "df": int(vocab.doc_freq[i])}
                  for term, i in sorted(vocab.term_index.items(), key=lambda kv: kv[1])],
    }


def vocab_from_dict(payload: dict) -> TfidfVocabulary:
    try:
        num_docs = int(payload["num_docs"])
        terms = payload["terms"]
        term_index = {entry["t"]: i for i, entry in enumerate(terms)}
        df = np.array([int(entry["df"]) for entry in terms], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed vocabulary payload: {e}")
    if len(term_index) != len(terms):
        raise FormatError("duplicate terms in vocabulary payload")
    return TfidfVocabulary(term_index=term_index, doc_freq=df,
                           idf=_idf(num_docs, df), num_docs=num_docs)
