"""Mini-batch training with Adam and validation-based early stopping, plus
evaluation metrics and the featurization pipeline shared by all entry points.

A batch is processed one document at a time on its own tape (no padding or
masking); gradients accumulate in document order and are averaged before the
single Adam step, so the loss being optimized is the batch mean exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .corpus import (Dataset, Document, EmbeddingTable, load_embedding_text,
                     stratified_split)
from .errors import NumericalError, TrainError
from .model import (ModelConfig, ModelParams, build_token_vocab,
                    forward, init_params, token_ids, wrap_params)
from .optim import AdamState, adam_step
from .rng import Rng
from .tensor import Tape, backward
from .textprep import normalize_and_tokenize, remove_stopwords, strip_newsgroup_noise
from .tfidf import SparseVector, TfidfVocabulary, build_tfidf_vocab, compute_tfidf


@dataclass
class TrainConfig:
    model: ModelConfig
    lr: float = 0.001
    batch_size: int = 64
    max_epochs: int = 10
    val_fraction: float = 0.1
    patience: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0,1)")


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    seconds: float


@dataclass
class EvalReport:
    accuracy: float
    precision: np.ndarray   # per class
    recall: np.ndarray      # per class
    confusion: np.ndarray   # rows = true class, cols = predicted


@dataclass
class PreparedDoc:
    id: str
    label: int
    tokens: list[str]        # semantic-branch tokens, truncated
    ids: np.ndarray          # semantic vocabulary indices, truncated
    tfidf: SparseVector


@dataclass
class FeaturePipeline:
    """Frozen featurization: tokenizer + stop list + both vocabularies."""

    semantic_vocab: dict[str, int]
    tfidf_vocab: TfidfVocabulary
    stopwords: set[str]
    strip_noise: bool = False

    @property
    def unk_id(self) -> int:
        return len(self.semantic_vocab)

    def tokenize(self, text: str) -> list[str]:
        if self.strip_noise:
            text = strip_newsgroup_noise(text)
        return normalize_and_tokenize(text)

    def prepare_text(self, text: str, max_seq_len: int, doc_id: str = "",
                     label: int = -1) -> PreparedDoc:
        tokens = self.tokenize(text)
        sv = compute_tfidf(remove_stopwords(tokens, self.stopwords), self.tfidf_vocab)
        return PreparedDoc(
            id=doc_id, label=label,
            tokens=tokens[:max_seq_len],
            ids=token_ids(tokens, self.semantic_vocab, self.unk_id, max_seq_len),
            tfidf=sv)

    def prepare(self, doc: Document, max_seq_len: int) -> PreparedDoc:
        return self.prepare_text(doc.text, max_seq_len, doc_id=doc.id, label=doc.label)


def build_pipeline(docs: Dataset | list[Document], stopwords: set[str],
                   max_terms: int, semantic_vocab_cap: int,
                   strip_noise: bool = False) -> FeaturePipeline:
    """Build both vocabularies from (training) documents only. The semantic
    vocabulary sees all tokens; the TF-IDF one sees stop-filtered tokens."""
    documents = docs.documents if isinstance(docs, Dataset) else docs
    token_lists = []
    for d in documents:
        text = strip_newsgroup_noise(d.text) if strip_noise else d.text
        token_lists.append(normalize_and_tokenize(text))
    stat_lists = [remove_stopwords(t, stopwords) for t in token_lists]
    return FeaturePipeline(
        semantic_vocab=build_token_vocab(token_lists, semantic_vocab_cap),
        tfidf_vocab=build_tfidf_vocab(stat_lists, max_terms),
        stopwords=stopwords,
        strip_noise=strip_noise)


def early_stop_check(history: list[float], patience: int) -> tuple[bool, int]:
    """(stop?, best epoch index). An epoch resets the counter only when it
    beats the best seen so far by more than 1e-6; patience <= 0 disables
    stopping entirely."""
    if not history:
        raise ValueError("empty history")
    best = history[0]
    best_idx = 0
    fails = 0
    for i in range(1, len(history)):
        if history[i] > best + 1e-6:
            best = history[i]
            best_idx = i
            fails = 0
        else:
            fails += 1
    return patience > 0 and fails >= patience, best_idx


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochMetrics]
    pipeline: FeaturePipeline
    config: ModelConfig
    label_names: tuple[str, ...]
    best_epoch: int


def _check_trainable(docs: list[PreparedDoc], num_classes: int) -> None:
    labels = {d.label for d in docs}
    if len(labels) < 2:
        raise TrainError(f"need documents from >= 2 classes, found {len(labels)}")
    if num_classes < 2:
        raise TrainError("need at least 2 classes")
    empty = [d.id for d in docs if len(d.ids) == 0]
    if empty:
        raise TrainError(f"{len(empty)} document(s) empty after preprocessing, "
                         f"e.g. {empty[:3]}")


def train_prepared(train_docs: list[PreparedDoc], val_docs: list[PreparedDoc],
                   config: TrainConfig, rng: Rng,
                   params: ModelParams, gate_override: float | None = None,
                   epoch_callback: Optional[Callable[[EpochMetrics], None]] = None,
                   ) -> tuple[ModelParams, list[EpochMetrics], int]:
    """Core loop over already-featurized documents with initialized params.

    Per epoch: seeded shuffle, batches of batch_size (last partial kept),
    mean-loss gradient per batch, one joint Adam step. Keeps the parameters
    of the best validation epoch.
    """
    mc = config.model
    _check_trainable(train_docs, mc.num_classes)
    state = AdamState.init(params.named_arrays())
    n = len(train_docs)
    grad_bufs = {k: np.zeros_like(a) for k, a in params.named_arrays().items()}

    history: list[EpochMetrics] = []
    val_accs: list[float] = []
    best_params = params.copy()
    best_epoch = 0

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        loss_sum = 0.0
        hits = 0
        for start in range(0, n, config.batch_size):  # last partial batch kept
            batch = order[start:start + config.batch_size]
            for buf in grad_bufs.values():
                buf.fill(0.0)
            for di in batch:
                doc = train_docs[di]
                tape = Tape()
                leaves = wrap_params(params, tape)
                trace, loss = forward(params, mc, doc.ids, doc.tfidf,
                                      label=doc.label, training=True, rng=rng,
                                      tape=tape, gate_override=gate_override,
                                      leaves=leaves)
                lv = float(loss.data)
                if not np.isfinite(lv):
                    raise NumericalError("non-finite training loss")
                loss_sum += lv
                if int(np.argmax(trace.probs)) == doc.label:
                    hits += 1
                grads = backward(loss)
                for name, leaf in leaves.items():
                    grads.add_into(leaf, grad_bufs[name])
            inv = 1.0 / len(batch)
            for buf in grad_bufs.values():
                buf *= inv
            adam_step(params.named_arrays(), grad_bufs, state, config.lr)

        val_report = evaluate_prepared(params, mc, val_docs,
                                       gate_override=gate_override)
        metrics = EpochMetrics(
            epoch=epoch,
            train_loss=loss_sum / n,
            train_acc=hits / n,
            val_acc=val_report.accuracy,
            seconds=time.perf_counter() - t0)
        history.append(metrics)
        if epoch_callback is not None:
            epoch_callback(metrics)

        val_accs.append(metrics.val_acc)
        stop, best_idx = early_stop_check(val_accs, config.patience)
        if best_idx == len(val_accs) - 1:
            best_params = params.copy()
            best_epoch = best_idx
        if stop:
            break
    return best_params, history, best_epoch


def train(dataset: Dataset, config: TrainConfig, stopwords: set[str],
          strip_noise: bool = False, pretrained: EmbeddingTable | None = None,
          embeddings_path: str | None = None,
          pipeline: FeaturePipeline | None = None,
          gate_override: float | None = None,
          epoch_callback: Optional[Callable[[EpochMetrics], None]] = None,
          ) -> TrainResult:
    """Split off validation, freeze vocabularies on the training portion,
    then run the core loop. Passing a prebuilt pipeline skips vocabulary
    construction (the caller owns leakage concerns in that case).
    embeddings_path loads pretrained word vectors against the finished
    semantic vocabulary."""
    train_ds, val_ds = stratified_split(dataset, config.val_fraction, config.seed)
    if pipeline is None:
        pipeline = build_pipeline(train_ds, stopwords,
                                  max_terms=config.model.tfidf_dim,
                                  semantic_vocab_cap=config.model.vocab_size_semantic,
                                  strip_noise=strip_noise)
    mc = replace(config.model,
                 vocab_size_semantic=len(pipeline.semantic_vocab),
                 tfidf_dim=pipeline.tfidf_vocab.size,
                 num_classes=len(dataset.label_names))
    config = replace(config, model=mc)
    if embeddings_path is not None:
        if pretrained is not None:
            raise ValueError("pass either pretrained or embeddings_path, not both")
        pretrained = load_embedding_text(embeddings_path, pipeline.semantic_vocab,
                                         mc.embed_dim)

    train_docs = [pipeline.prepare(d, mc.max_seq_len) for d in train_ds.documents]
    val_docs = [pipeline.prepare(d, mc.max_seq_len) for d in val_ds.documents]

    rng = Rng(config.seed)
    params = init_params(mc, rng, pretrained)
    best_params, history, best_epoch = train_prepared(
        train_docs, val_docs, config, rng, params,
        gate_override=gate_override, epoch_callback=epoch_callback)
    return TrainResult(params=best_params, history=history, pipeline=pipeline,
                       config=mc, label_names=dataset.label_names,
                       best_epoch=best_epoch)


def evaluate_prepared(params: ModelParams, config: ModelConfig,
                      docs: list[PreparedDoc],
                      gate_override: float | None = None) -> EvalReport:
    """Argmax predictions (ties -> lowest class index) aggregated into
    accuracy, per-class precision/recall, and a confusion matrix."""
    c = config.num_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    for doc in docs:
        trace, _ = forward(params, config, doc.ids, doc.tfidf,
                           gate_override=gate_override)
        pred = int(np.argmax(trace.probs))
        confusion[doc.label, pred] += 1
    total = confusion.sum()
    correct = np.trace(confusion)
    col = confusion.sum(axis=0).astype(np.float64)
    row = confusion.sum(axis=1).astype(np.float64)
    diag = np.diag(confusion).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(col > 0, diag / col, 0.0)
        recall = np.where(row > 0, diag / row, 0.0)
    return EvalReport(accuracy=float(correct / total) if total else 0.0,
                      precision=precision, recall=recall, confusion=confusion)


def evaluate(params: ModelParams, config: ModelConfig, pipeline: FeaturePipeline,
             dataset: Dataset) -> EvalReport:
    docs = [pipeline.prepare(d, config.max_seq_len) for d in dataset.documents]
    return evaluate_prepared(params, config, docs)
