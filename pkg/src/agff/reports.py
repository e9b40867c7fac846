"""Interpretability reports: fusion-gate statistics and top-attention words."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Dataset
from .errors import ModeError
from .model import ForwardTrace, ModelConfig, ModelParams, forward
from .training import FeaturePipeline

HIST_BINS = 10


@dataclass
class ClassGateStats:
    mean_gate: float          # mean over documents of the per-dimension mean
    histogram: list[int]      # document-mean gate values, 10 bins on [0,1]
    count: int


@dataclass
class GateReport:
    per_class: dict[str, ClassGateStats]
    global_mean: float
    count: int

    def to_dict(self) -> dict:
        return {
            "global_mean": self.global_mean,
            "count": self.count,
            "per_class": {name: {"mean_gate": s.mean_gate,
                                 "histogram": s.histogram,
                                 "count": s.count}
                          for name, s in self.per_class.items()},
        }


def gate_summary(params: ModelParams, config: ModelConfig,
                 pipeline: FeaturePipeline, dataset: Dataset) -> GateReport:
    """Inference over the dataset, aggregating the per-document mean of the
    fusion gate vector. Only meaningful for gated models."""
    if config.fusion_mode != "gated":
        raise ModeError(f"gate summary requires a gated model, got {config.fusion_mode!r}")
    doc_means: dict[int, list[float]] = {}
    for doc in dataset.documents:
        prepared = pipeline.prepare(doc, config.max_seq_len)
        trace, _ = forward(params, config, prepared.ids, prepared.tfidf)
        if trace.gate is None:  # empty document fell back to the output bias
            continue
        doc_means.setdefault(doc.label, []).append(float(trace.gate.mean()))
    per_class = {}
    all_means: list[float] = []
    for label, means in sorted(doc_means.items()):
        hist, _ = np.histogram(means, bins=HIST_BINS, range=(0.0, 1.0))
        per_class[dataset.label_names[label]] = ClassGateStats(
            mean_gate=float(np.mean(means)),
            histogram=[int(c) for c in hist],
            count=len(means))
        all_means.extend(means)
    if not all_means:
        raise ModeError("no documents produced a gate (all empty?)")
    return GateReport(per_class=per_class,
                      global_mean=float(np.mean(all_means)),
                      count=len(all_means))


def attention_topk(trace: ForwardTrace, tokens: list[str], k: int) -> list[tuple[str, float]]:
    """Top-k (token, weight) pairs by attention, earlier position wins ties."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = len(trace.alpha)
    order = sorted(range(n), key=lambda i: (-trace.alpha[i], i))[:k]
    return [(tokens[i], float(trace.alpha[i])) for i in order]
