"""Binary model checkpoints.

Layout: magic "AGFF" | u32 version | u32 metadata length | metadata JSON
(UTF-8) | raw little-endian float32 tensors in ModelParams field order.
Training runs in float64; checkpoints quantize to float32.

Metadata carries everything inference needs: model config, label names,
both vocabularies, the tokenizer/stop-list hash, and the noise-strip flag.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, VersionError
from .model import ModelConfig, ModelParams, param_shapes
from .tfidf import vocab_from_dict, vocab_to_dict
from .training import FeaturePipeline

MAGIC = b"AGFF"
VERSION = 1


@dataclass
class CheckpointMeta:
    config: ModelConfig
    label_names: tuple[str, ...]
    prep_hash: str
    pipeline: FeaturePipeline


def save_checkpoint(params: ModelParams, meta: CheckpointMeta, path: str | Path) -> None:
    meta_dict = {
        "config": meta.config.to_dict(),
        "label_names": list(meta.label_names),
        "prep_hash": meta.prep_hash,
        "strip_noise": meta.pipeline.strip_noise,
        "semantic_vocab": _vocab_tokens(meta.pipeline.semantic_vocab),
        "tfidf_vocab": vocab_to_dict(meta.pipeline.tfidf_vocab),
    }
    meta_bytes = json.dumps(meta_dict).encode("utf-8")
    shapes = param_shapes(meta.config)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(meta_bytes)))
        f.write(meta_bytes)
        for name, arr in params.named_arrays().items():
            if arr.shape != shapes[name]:
                raise FormatError(f"{name}: shape {arr.shape} != declared {shapes[name]}")
            f.write(arr.astype("<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[ModelParams, CheckpointMeta]:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read checkpoint {path}: {e}")
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise FormatError(f"bad magic in {path}: not a model checkpoint")
    version, meta_len = struct.unpack("<II", blob[4:12])
    if version != VERSION:
        raise VersionError(f"unsupported checkpoint version {version} (expected {VERSION})")
    if len(blob) < 12 + meta_len:
        raise FormatError("truncated checkpoint metadata")
    try:
        meta_dict = json.loads(blob[12:12 + meta_len].decode("utf-8"))
        config = ModelConfig.from_dict(meta_dict["config"])
        semantic_vocab = {t: i for i, t in enumerate(meta_dict["semantic_vocab"])}
        pipeline = FeaturePipeline(
            semantic_vocab=semantic_vocab,
            tfidf_vocab=vocab_from_dict(meta_dict["tfidf_vocab"]),
            stopwords=set(),  # stop list supplied at use time, checked via prep_hash
            strip_noise=bool(meta_dict["strip_noise"]))
        meta = CheckpointMeta(config=config,
                              label_names=tuple(meta_dict["label_names"]),
                              prep_hash=meta_dict["prep_hash"],
                              pipeline=pipeline)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise FormatError(f"malformed checkpoint metadata: {e}")

    shapes = param_shapes(config)
    expected = sum(int(np.prod(s)) for s in shapes.values()) * 4
    payload = blob[12 + meta_len:]
    if len(payload) != expected:
        raise FormatError(f"tensor payload is {len(payload)} bytes, expected {expected}")
    arrays = {}
    offset = 0
    for name, shape in shapes.items():
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(
            payload, dtype="<f4", count=count, offset=offset,
        ).astype(np.float64).reshape(shape)
        offset += count * 4
    return ModelParams(**arrays), meta


def _vocab_tokens(vocab: dict[str, int]) -> list[str]:
    tokens = [""] * len(vocab)
    for t, i in vocab.items():
        tokens[i] = t
    return tokens
