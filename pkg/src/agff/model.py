"""The fusion classifier: embedding -> BiLSTM -> attention pooling on the
semantic side, a learned linear projection of the TF-IDF vector on the
statistical side, and a sigmoid gate blending the two before the softmax
output layer. Ablation fusion modes: concat, semantic_only, tfidf_only.

The BiLSTM recurrence is a single fused tape op per direction with a
hand-written backward-through-time rule; everything else composes the
generic tensor ops.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, EmptyDocumentError, ShapeError
from .corpus import EmbeddingTable
from .rng import Rng
from .tfidf import SparseVector
from . import tensor as T
from .tensor import Tape, Tensor

FUSION_MODES = ("gated", "concat", "semantic_only", "tfidf_only")


@dataclass
class ModelConfig:
    vocab_size_semantic: int
    num_classes: int
    embed_dim: int = 64
    hidden_per_dir: int = 64
    tfidf_dim: int = 5000
    fusion_mode: str = "gated"
    max_seq_len: int = 400
    dropout_p: float = 0.5

    def __post_init__(self):
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"unknown fusion mode {self.fusion_mode!r}")
        if min(self.vocab_size_semantic, self.embed_dim, self.hidden_per_dir,
               self.tfidf_dim, self.max_seq_len) < 1:
            raise ValueError("all dimensions must be >= 1")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0,1), got {self.dropout_p}")

    @property
    def fused_dim(self) -> int:
        return 2 * self.hidden_per_dir

    @property
    def out_dim(self) -> int:
        return 2 * self.fused_dim if self.fusion_mode == "concat" else self.fused_dim

    def to_dict(self) -> dict:
        return {
            "vocab_size_semantic": self.vocab_size_semantic,
            "num_classes": self.num_classes,
            "embed_dim": self.embed_dim,
            "hidden_per_dir": self.hidden_per_dir,
            "tfidf_dim": self.tfidf_dim,
            "fusion_mode": self.fusion_mode,
            "max_seq_len": self.max_seq_len,
            "dropout_p": self.dropout_p,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class ModelParams:
    """All learnable arrays. Field order is the pinned serialization order."""

    embed: np.ndarray        # (vocab_size_semantic + 1, k); last row is UNK
    fwd_w_in: np.ndarray     # (k, 4H), gate blocks ordered input|forget|cell|output
    fwd_w_rec: np.ndarray    # (H, 4H)
    fwd_bias: np.ndarray     # (4H,)
    bwd_w_in: np.ndarray
    bwd_w_rec: np.ndarray
    bwd_bias: np.ndarray
    attn_w: np.ndarray       # (D, D)
    attn_b: np.ndarray       # (D,)
    attn_v: np.ndarray       # (D,)
    stat_w: np.ndarray       # (D, V)
    gate_w_sem: np.ndarray   # (D, D)
    gate_w_stat: np.ndarray  # (D, D)
    gate_b: np.ndarray       # (D,)
    out_w: np.ndarray        # (C, out_dim)
    out_b: np.ndarray        # (C,)

    FIELD_ORDER = ("embed", "fwd_w_in", "fwd_w_rec", "fwd_bias",
                   "bwd_w_in", "bwd_w_rec", "bwd_bias",
                   "attn_w", "attn_b", "attn_v", "stat_w",
                   "gate_w_sem", "gate_w_stat", "gate_b", "out_w", "out_b")

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.FIELD_ORDER}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.named_arrays().items()})


@dataclass
class ForwardTrace:
    alpha: np.ndarray            # (n,) attention weights; empty when the
                                 # semantic branch did not run
    gate: Optional[np.ndarray]   # (D,) in gated mode, else None
    fused: np.ndarray            # fusion output (before output-layer dropout)
    logits: np.ndarray           # (C,)
    probs: np.ndarray            # (C,)


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Declared shape of every parameter tensor, in serialization order."""
    k = config.embed_dim
    h = config.hidden_per_dir
    d = config.fused_dim
    return {
        "embed": (config.vocab_size_semantic + 1, k),
        "fwd_w_in": (k, 4 * h), "fwd_w_rec": (h, 4 * h), "fwd_bias": (4 * h,),
        "bwd_w_in": (k, 4 * h), "bwd_w_rec": (h, 4 * h), "bwd_bias": (4 * h,),
        "attn_w": (d, d), "attn_b": (d,), "attn_v": (d,),
        "stat_w": (d, config.tfidf_dim),
        "gate_w_sem": (d, d), "gate_w_stat": (d, d), "gate_b": (d,),
        "out_w": (config.num_classes, config.out_dim),
        "out_b": (config.num_classes,),
    }


def _xavier(rng: Rng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(shape, -limit, limit)


def init_params(config: ModelConfig, rng: Rng,
                pretrained: EmbeddingTable | None = None) -> ModelParams:
    """Uniform Xavier weights, zero biases except LSTM forget bias = 1,
    embeddings uniform(-0.05, 0.05) then overwritten by pretrained rows."""
    k = config.embed_dim
    h = config.hidden_per_dir
    d = config.fused_dim
    v = config.tfidf_dim
    c = config.num_classes

    embed = rng.uniform((config.vocab_size_semantic + 1, k), -0.05, 0.05)

    def lstm_weights():
        w_in = _xavier(rng, (k, 4 * h), k, 4 * h)
        w_rec = _xavier(rng, (h, 4 * h), h, 4 * h)
        bias = np.zeros(4 * h)
        bias[h:2 * h] = 1.0  # forget gate starts open
        return w_in, w_rec, bias

    fwd_w_in, fwd_w_rec, fwd_bias = lstm_weights()
    bwd_w_in, bwd_w_rec, bwd_bias = lstm_weights()

    params = ModelParams(
        embed=embed,
        fwd_w_in=fwd_w_in, fwd_w_rec=fwd_w_rec, fwd_bias=fwd_bias,
        bwd_w_in=bwd_w_in, bwd_w_rec=bwd_w_rec, bwd_bias=bwd_bias,
        attn_w=_xavier(rng, (d, d), d, d),
        attn_b=np.zeros(d),
        attn_v=_xavier(rng, (d,), d, 1),
        stat_w=_xavier(rng, (d, v), v, d),
        gate_w_sem=_xavier(rng, (d, d), d, d),
        gate_w_stat=_xavier(rng, (d, d), d, d),
        gate_b=np.zeros(d),
        out_w=_xavier(rng, (c, config.out_dim), config.out_dim, c),
        out_b=np.zeros(c),
    )
    if pretrained is not None:
        if pretrained.dim != k:
            raise ShapeError(f"pretrained dim {pretrained.dim} != embed_dim {k}")
        for idx, vec in pretrained.rows.items():
            if not 0 <= idx < config.vocab_size_semantic:
                raise ShapeError(f"pretrained row index {idx} outside vocabulary")
            params.embed[idx] = vec
        if pretrained.rows and pretrained.unk_row is not None:
            params.embed[config.vocab_size_semantic] = pretrained.unk_row
    return params


def build_token_vocab(corpus: list[list[str]], max_size: int) -> dict[str, int]:
    """Top max_size tokens by total occurrence count, ties lexicographic."""
    counts: Counter[str] = Counter()
    for tokens in corpus:
        counts.update(tokens)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_size]
    return {t: i for i, (t, _) in enumerate(ranked)}


def token_ids(tokens: list[str], vocab: dict[str, int], unk_id: int,
              max_seq_len: int) -> np.ndarray:
    """Vocabulary indices for the first max_seq_len tokens, UNK elsewhere."""
    ids = [vocab.get(t, unk_id) for t in tokens[:max_seq_len]]
    return np.asarray(ids, dtype=np.int64)


def wrap_params(params: ModelParams, tape: Tape | None) -> dict[str, Tensor]:
    """Leaf tensors when differentiating, plain constants otherwise."""
    arrays = params.named_arrays()
    if tape is None:
        return {k: Tensor(a) for k, a in arrays.items()}
    return {k: tape.leaf(a) for k, a in arrays.items()}


def embed_sequence(tokens: list[str], embed: Tensor, vocab: dict[str, int],
                   max_seq_len: int) -> Tensor:
    """Embedding rows for a token sequence (truncated); UNK row for
    out-of-vocabulary tokens. Rejects empty sequences."""
    if not tokens:
        raise EmptyDocumentError("cannot embed an empty token sequence")
    unk_id = embed.data.shape[0] - 1
    ids = token_ids(tokens, vocab, unk_id, max_seq_len)
    return T.gather_rows(embed, ids)


# ---------------------------------------------------------------------------
# BiLSTM direction as one fused tape op (explicit backward-through-time)


def lstm_direction(emb: Tensor, w_in: Tensor, w_rec: Tensor, bias: Tensor) -> Tensor:
    """Run the standard 4-gate LSTM over the rows of `emb` (zero initial
    state), returning the hidden state per step as an (n, H) tensor."""
    x, wx, wh, b = emb.data, w_in.data, w_rec.data, bias.data
    n = x.shape[0]
    h4 = wx.shape[1]
    h = h4 // 4
    if wh.shape != (h, h4) or b.shape != (h4,) or x.shape[1] != wx.shape[0]:
        raise ShapeError(f"lstm: inconsistent shapes emb{x.shape} w_in{wx.shape} "
                         f"w_rec{wh.shape} bias{b.shape}")
    h2, h3 = 2 * h, 3 * h

    xp = x @ wx + b
    acts = np.empty((n, h4))   # post-nonlinearity gate values i|f|cand|o
    cells = np.empty((n, h))
    tanh_c = np.empty((n, h))
    hs = np.empty((n, h))
    hvec = np.zeros(h)
    cvec = np.zeros(h)
    pre = np.empty(h4)
    tmp = np.empty(h)
    with np.errstate(over="ignore"):
        for t in range(n):
            np.dot(hvec, wh, out=pre)
            pre += xp[t]
            a = acts[t]
            # sigmoid on the whole row, then overwrite the candidate block
            np.negative(pre, out=a)
            np.exp(a, out=a)
            a += 1.0
            np.reciprocal(a, out=a)
            np.tanh(pre[h2:h3], out=a[h2:h3])
            cw = cells[t]
            np.multiply(a[h:h2], cvec, out=cw)       # forget * prev cell
            np.multiply(a[:h], a[h2:h3], out=tmp)    # input * candidate
            cw += tmp
            cvec = cw
            np.tanh(cw, out=tanh_c[t])
            np.multiply(a[h3:], tanh_c[t], out=hs[t])
            hvec = hs[t]

    tape = T._merge_tape(emb, w_in, w_rec, bias)
    if tape is None:
        return Tensor(T._check_finite(hs))

    def pull(gout):
        dxp = np.empty((n, h4))
        dh = np.zeros(h)
        dc = np.zeros(h)
        dht = np.empty(h)
        dct = np.empty(h)
        scratch = np.empty(h)
        for t in range(n - 1, -1, -1):
            a = acts[t]
            i, f, cand, o = a[:h], a[h:h2], a[h2:h3], a[h3:]
            tc = tanh_c[t]
            np.add(dh, gout[t], out=dht)
            # dc_t = dh * o * tanh'(c) + carried dc
            np.multiply(tc, tc, out=dct)
            np.subtract(1.0, dct, out=dct)
            dct *= o
            dct *= dht
            dct += dc
            row = dxp[t]
            ri, rf, rc, ro = row[:h], row[h:h2], row[h2:h3], row[h3:]
            # input gate: dct * cand * i * (1 - i)
            np.subtract(1.0, i, out=ri)
            ri *= i
            ri *= cand
            ri *= dct
            # forget gate: dct * c_prev * f * (1 - f)
            np.subtract(1.0, f, out=rf)
            rf *= f
            if t > 0:
                rf *= cells[t - 1]
                rf *= dct
            else:
                rf[:] = 0.0  # zero initial cell state
            # candidate: dct * i * (1 - cand^2)
            np.multiply(cand, cand, out=rc)
            np.subtract(1.0, rc, out=rc)
            rc *= i
            rc *= dct
            # output gate: dht * tanh(c) * o * (1 - o)
            np.subtract(1.0, o, out=ro)
            ro *= o
            ro *= tc
            ro *= dht
            np.multiply(dct, f, out=scratch)
            dc, scratch = scratch, dc
            np.dot(row, wh.T, out=dh)
        grads = {}
        if emb.tracked:
            grads[0] = dxp @ wx.T
        if w_in.tracked:
            grads[1] = x.T @ dxp
        if w_rec.tracked:
            hprev = np.vstack([np.zeros((1, h)), hs[:-1]])
            grads[2] = hprev.T @ dxp
        if bias.tracked:
            grads[3] = dxp.sum(axis=0)
        return [grads[j] for j, p in enumerate((emb, w_in, w_rec, bias)) if p.tracked]

    parents = [p for p in (emb, w_in, w_rec, bias) if p.tracked]
    return tape.record(hs, parents, pull)


def bilstm_encode(embedded: Tensor, p: dict[str, Tensor]) -> Tensor:
    """Per-token annotations [forward_h ; backward_h], shape (n, 2H)."""
    fwd = lstm_direction(embedded, p["fwd_w_in"], p["fwd_w_rec"], p["fwd_bias"])
    rev_in = T.reverse_rows(embedded)
    bwd = T.reverse_rows(lstm_direction(rev_in, p["bwd_w_in"], p["bwd_w_rec"], p["bwd_bias"]))
    return T.concat(fwd, bwd)


def attention_pool(annotations: Tensor, p: dict[str, Tensor]) -> tuple[Tensor, Tensor]:
    """Softmax-weighted sum of annotations; weights from a one-layer tanh
    scorer against a learned context vector."""
    pre = T.add(T.matmul(annotations, T.transpose(p["attn_w"])), p["attn_b"])
    scores = T.matmul(T.tanh(pre), p["attn_v"])
    alpha = T.softmax(scores)
    pooled = T.matmul(alpha, annotations)
    return pooled, alpha


def project_stat(sv: SparseVector, stat_w: Tensor) -> Tensor:
    """Dense projection of the sparse TF-IDF vector, touching only nonzeros."""
    w = stat_w.data
    if sv.dim != w.shape[1]:
        raise ShapeError(f"tfidf dim {sv.dim} != projection width {w.shape[1]}")
    if sv.nnz == 0:
        out = np.zeros(w.shape[0])
        if stat_w.tracked:
            return stat_w.tape.record(out, [stat_w], lambda g: [None])
        return Tensor(out)
    cols = sv.indices
    vals = sv.values
    out = w[:, cols] @ vals
    if not stat_w.tracked:
        return Tensor(T._check_finite(out))
    shape = w.shape
    return stat_w.tape.record(
        out, [stat_w],
        lambda g: [T.SparseCols(shape, cols, g[:, None] * vals[None, :])])


def fuse(h: Tensor, s_proj: Tensor, p: dict[str, Tensor], mode: str,
         gate_override: float | None = None) -> tuple[Tensor, Optional[np.ndarray]]:
    """Combine semantic and statistical vectors per the fusion mode.

    gated: z = g*h + (1-g)*s with g = sigmoid(W_sem h + W_stat s + b).
    The gate_override test hook substitutes a constant gate (no gradient
    flows into the gate parameters); it is never part of a trained model.
    """
    if mode == "semantic_only":
        return h, None
    if mode == "tfidf_only":
        return s_proj, None
    if mode == "concat":
        return T.concat(h, s_proj), None
    if mode != "gated":
        raise ContractError(f"unknown fusion mode {mode!r}")
    if gate_override is not None:
        gval = float(gate_override)
        z = T.add(T.scale(h, gval), T.scale(s_proj, 1.0 - gval))
        return z, np.full(h.data.shape[0], gval)
    pre = T.add(T.add(T.matmul(p["gate_w_sem"], h), T.matmul(p["gate_w_stat"], s_proj)),
                p["gate_b"])
    gate = T.sigmoid(pre)
    one_minus = T.sub(T.constant(np.ones_like(gate.data)), gate)
    z = T.add(T.mul(gate, h), T.mul(one_minus, s_proj))
    return z, gate.data


def forward(params: ModelParams, config: ModelConfig, ids: np.ndarray,
            sv: SparseVector, label: int | None = None, training: bool = False,
            rng: Rng | None = None, tape: Tape | None = None,
            gate_override: float | None = None,
            leaves: dict[str, Tensor] | None = None) -> tuple[ForwardTrace, Optional[Tensor]]:
    """One document through the full pipeline.

    `ids` are semantic-vocabulary indices already truncated to max_seq_len.
    Returns the trace plus the scalar loss tensor when a label is given.
    Empty documents are rejected while training and fall back to the output
    bias alone at inference.
    """
    if training and (config.dropout_p > 0) and rng is None:
        raise ContractError("training with dropout requires an rng")
    p = leaves if leaves is not None else wrap_params(params, tape)
    mode = config.fusion_mode

    if len(ids) == 0 and mode != "tfidf_only":
        if training:
            raise EmptyDocumentError("empty document cannot be used for training")
        logits = params.out_b.copy()
        probs = T.softmax(T.constant(logits)).data
        trace = ForwardTrace(alpha=np.empty(0), gate=None, fused=np.zeros(0),
                             logits=logits, probs=probs)
        if label is None:
            return trace, None
        loss, _ = T.softmax_cross_entropy(T.constant(logits), label)
        return trace, loss

    alpha_data = np.empty(0)
    h = None
    if mode != "tfidf_only":
        emb = T.gather_rows(p["embed"], ids)
        emb = T.dropout(emb, config.dropout_p, rng, training)
        ann = bilstm_encode(emb, p)
        h, alpha = attention_pool(ann, p)
        alpha_data = alpha.data

    s_proj = None
    if mode != "semantic_only":
        s_proj = project_stat(sv, p["stat_w"])

    z, gate_data = fuse(h, s_proj, p, mode, gate_override)
    fused_data = z.data
    z = T.dropout(z, config.dropout_p, rng, training)
    logits_t = T.add(T.matmul(p["out_w"], z), p["out_b"])

    if label is not None:
        loss, probs = T.softmax_cross_entropy(logits_t, label)
    else:
        loss = None
        probs = T.softmax(Tensor(logits_t.data)).data
    trace = ForwardTrace(alpha=alpha_data, gate=gate_data, fused=fused_data,
                         logits=logits_t.data, probs=probs)
    return trace, loss
