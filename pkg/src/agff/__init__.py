"""Gated fusion of TF-IDF and BiLSTM-attention features for news text
classification, with a from-scratch autodiff substrate and a CLI."""

from .corpus import (Dataset, Document, EmbeddingTable, load_agnews_csv,
                     load_embedding_text, load_newsgroups_dir, stratified_split)
from .model import (ForwardTrace, ModelConfig, ModelParams, forward,
                    init_params)
from .reports import GateReport, attention_topk, gate_summary
from .rng import Rng
from .tfidf import SparseVector, TfidfVocabulary, build_tfidf_vocab, compute_tfidf
from .training import (EpochMetrics, EvalReport, FeaturePipeline, TrainConfig,
                       TrainResult, build_pipeline, evaluate, train)

__version__ = "0.1.0"
