"""Training orchestration: four modes, re-clustering, checkpointing.

Modes:
  vanilla        linear head on embeddings, cross-entropy only
  preced         composite loss with the precedent term
  preced_provis  composite loss with precedent and provision terms
  frozen         embeddings read from file, only the head updates

The optimizer is plain gradient descent with decoupled weight decay on
the weight matrices (encoder projection and head); biases and prototype
vectors are not decayed. The best checkpoint is chosen by validation
macro-F1, never by loss.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .corpus.io import span_uids
from .corpus.types import ContextSpan, LabelSet
from .encoder import EncoderParams, encode_backward, encode_features, hash_features_batch
from .evaluation import f1_report
from .loss import (
    HEAD_FEATURES_ALL,
    HEAD_FEATURES_PRECEDENT,
    ClassifierHead,
    LossWeights,
    NonFiniteLossError,
    PrototypeBank,
    bce_on_features,
    head_scores,
    loss_backward,
    loss_forward,
)
from .pcem import read_embedding_map
from .prototypes import (
    KIND_PRECEDENT,
    KIND_PROVISION,
    Prototype,
    discover_prototypes,
    encode_provision_prototypes,
)
from .seeding import derive_seed

MODES = ("vanilla", "preced", "preced_provis", "frozen")
PREDICTION_THRESHOLD = 0.5

_MAGIC = b"PCCK"
_VERSION = 1


class ConfigError(ValueError):
    pass


class TrainingDiverged(ArithmeticError):
    """Non-finite loss during training; carries epoch and term name."""

    def __init__(self, epoch: int, term: str):
        self.epoch = epoch
        self.term = term
        super().__init__(f"training diverged at epoch {epoch} in term {term!r}")


@dataclass
class TrainConfig:
    mode: str = "preced_provis"
    epochs: int = 20
    batch_size: int = 8
    learning_rate: float = 2e-5
    weight_decay: float = 0.01
    recluster_every: int = 5
    k: int = 5
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    hash_dim: int = 4096
    embed_dim: int = 32
    head_features: str = HEAD_FEATURES_ALL
    embedding_file: str | None = None
    provision_embedding_file: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("batch_size", "recluster_every", "k", "hash_dim", "embed_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate must be > 0 and weight_decay >= 0")
        if self.head_features not in (HEAD_FEATURES_ALL, HEAD_FEATURES_PRECEDENT):
            raise ConfigError(f"unknown head_features {self.head_features!r}")
        if self.mode == "frozen" and not self.embedding_file:
            raise ConfigError("frozen mode requires an embedding file")


@dataclass
class EpochLog:
    epoch: int
    bce: float
    d_preced: float
    d_provis: float
    total: float
    val_macro_f1: float


@dataclass
class PredictionResult:
    scores: np.ndarray  # per-label sigmoid scores, in [0, 1]
    predicted: np.ndarray  # binary vector, score >= threshold (inclusive)
    similarities: np.ndarray  # per-prototype scores, dump order


@dataclass
class Checkpoint:
    mode: str
    params: EncoderParams
    head: ClassifierHead
    head_features: str
    prototypes: list[Prototype]
    epoch: int
    val_macro_f1: float
    n_labels: int
    epsilon: float = 1e-4

    def bank(self) -> PrototypeBank:
        return PrototypeBank.from_prototypes(self.prototypes, self.params.embed_dim)


@dataclass
class _Split:
    spans: Sequence[ContextSpan]
    uids: list[str]
    features: np.ndarray  # (N, H) hashed counts; empty for frozen mode
    labels: np.ndarray  # (N, n)
    file_embeddings: np.ndarray | None = None  # frozen mode only


def train(
    config: TrainConfig,
    train_spans: Sequence[ContextSpan],
    val_spans: Sequence[ContextSpan],
    label_set: LabelSet,
) -> tuple[Checkpoint, list[EpochLog], dict]:
    """Run the configured mode; returns (best checkpoint, per-epoch log, diagnostics)."""
    if not train_spans or not val_spans:
        raise ConfigError("train and validation splits must be non-empty")
    if config.mode == "preced_provis" and label_set.missing_provisions():
        raise ConfigError(
            f"mode {config.mode} needs provision texts; missing: {label_set.missing_provisions()}"
        )

    params = EncoderParams.initialize(config.hash_dim, config.embed_dim, seed=derive_seed(config.seed, "encoder"))
    frozen = config.mode == "frozen"
    tr = _prepare_split(train_spans, label_set, config, frozen)
    va = _prepare_split(val_spans, label_set, config, frozen)
    diagnostics: dict = {"mode": config.mode, "labels_without_positives": [], "recluster_epochs": []}

    prototypes: list[Prototype] = []
    if config.mode != "vanilla":
        prototypes = _discover(config, params, tr, label_set, round_index=0, diagnostics=diagnostics)
    head = ClassifierHead.zeros(label_set.n, _feature_count(config, prototypes, params))
    head._column_keys = _column_keys(prototypes, config.head_features)

    frozen_snapshot = None
    if frozen:
        frozen_snapshot = (params.weight.tobytes(), params.bias.tobytes(),
                           [p.vector.tobytes() for p in prototypes])

    best = _snapshot(config, params, head, prototypes, label_set, epoch=0,
                     val_f1=_validate(config, params, head, prototypes, va))
    logs: list[EpochLog] = []
    rng_root = config.seed

    for epoch in range(1, config.epochs + 1):
        if (
            config.mode in ("preced", "preced_provis")
            and epoch > 1
            and (epoch - 1) % config.recluster_every == 0
        ):
            prototypes = _recluster(config, params, tr, label_set, epoch, diagnostics)
            head = _remap_head(head, prototypes, config, params)

        order = np.random.default_rng([derive_seed(rng_root, "shuffle"), epoch]).permutation(len(tr.spans))
        sums = {"bce": 0.0, "d_preced": 0.0, "d_provis": 0.0, "total": 0.0}
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            try:
                batch_terms = _train_step(config, params, head, prototypes, tr, idx)
            except NonFiniteLossError as exc:
                raise TrainingDiverged(epoch, exc.term) from exc
            for key in sums:
                sums[key] += batch_terms[key] * len(idx)
        means = {key: value / len(order) for key, value in sums.items()}

        val_f1 = _validate(config, params, head, prototypes, va)
        logs.append(EpochLog(epoch, means["bce"], means["d_preced"], means["d_provis"], means["total"], val_f1))
        if val_f1 > best.val_macro_f1:
            best = _snapshot(config, params, head, prototypes, label_set, epoch, val_f1)

    if frozen_snapshot is not None:
        same = (
            params.weight.tobytes() == frozen_snapshot[0]
            and params.bias.tobytes() == frozen_snapshot[1]
            and [p.vector.tobytes() for p in prototypes] == frozen_snapshot[2]
        )
        diagnostics["frozen_state_untouched"] = same
        assert same, "frozen mode must not mutate encoder or prototype state"
    return best, logs, diagnostics


def predict(
    checkpoint: Checkpoint,
    span: ContextSpan,
    embedding: np.ndarray | None = None,
    threshold: float = PREDICTION_THRESHOLD,
) -> PredictionResult:
    """Per-label scores, thresholded prediction and the full prototype
    similarity vector of one span under a checkpoint."""
    if embedding is None:
        if checkpoint.mode == "frozen":
            raise ConfigError("frozen checkpoints need a precomputed embedding per span")
        feats = hash_features_batch([span], checkpoint.params.hash_dim)
        embedding, _ = encode_features(feats, checkpoint.params)
        embedding = embedding[0]
    embedding = np.asarray(embedding, dtype=np.float64)
    if embedding.shape != (checkpoint.params.embed_dim,):
        raise ConfigError(
            f"embedding dim {embedding.shape} does not match checkpoint ({checkpoint.params.embed_dim},)"
        )
    bank = checkpoint.bank()
    sims = _similarities(embedding[None, :], bank, checkpoint)
    features = _prediction_features(embedding[None, :], sims, checkpoint, bank)
    scores = head_scores(features, checkpoint.head)[0]
    return PredictionResult(scores, (scores >= threshold).astype(np.uint8), sims[0])


def predict_batch(
    checkpoint: Checkpoint,
    spans: Sequence[ContextSpan],
    embeddings: np.ndarray | None = None,
    threshold: float = PREDICTION_THRESHOLD,
) -> list[PredictionResult]:
    if embeddings is None:
        if checkpoint.mode == "frozen":
            raise ConfigError("frozen checkpoints need precomputed embeddings")
        feats = hash_features_batch(spans, checkpoint.params.hash_dim)
        embeddings, _ = encode_features(feats, checkpoint.params)
    bank = checkpoint.bank()
    sims = _similarities(embeddings, bank, checkpoint)
    features = _prediction_features(embeddings, sims, checkpoint, bank)
    scores = head_scores(features, checkpoint.head)
    return [
        PredictionResult(scores[i], (scores[i] >= threshold).astype(np.uint8), sims[i])
        for i in range(len(spans))
    ]


def write_train_log(logs: Sequence[EpochLog], path: str | Path) -> None:
    """Tab-separated per-epoch loss breakdown."""
    lines = ["epoch\tbce\td_preced\td_provis\ttotal"]
    for log in logs:
        lines.append(
            f"{log.epoch}\t{log.bce:.10f}\t{log.d_preced:.10f}\t{log.d_provis:.10f}\t{log.total:.10f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- internals ---------------------------------------------------------------


def _prepare_split(spans, label_set, config, frozen: bool) -> _Split:
    uids = span_uids(spans)
    labels = np.stack([s.label_vector for s in spans]).astype(np.uint8)
    if frozen:
        table = read_embedding_map(config.embedding_file, expected_dim=None)
        missing = [u for u in uids if u not in table]
        if missing:
            raise ConfigError(
                f"embedding file {config.embedding_file} lacks {len(missing)} spans "
                f"(first: {missing[:3]})"
            )
        emb = np.stack([table[u] for u in uids])
        return _Split(spans, uids, np.zeros((len(spans), 0)), labels, emb)
    features = hash_features_batch(spans, config.hash_dim)
    return _Split(spans, uids, features, labels)


def _embed(config: TrainConfig, params: EncoderParams, split: _Split, idx=None):
    if split.file_embeddings is not None:
        E = split.file_embeddings if idx is None else split.file_embeddings[idx]
        return E, None
    feats = split.features if idx is None else split.features[idx]
    return encode_features(feats, params)


def _discover(config, params, tr: _Split, label_set, round_index: int, diagnostics: dict) -> list[Prototype]:
    E, _ = _embed(config, params, tr)
    precedent_protos, empty = discover_prototypes(
        E, tr.labels, tr.uids, k=config.k, s_min=config.weights.s_min,
        seed=derive_seed(config.seed, "kmeans", round_index),
    )
    diagnostics["labels_without_positives"] = empty
    protos = list(precedent_protos)
    protos += _provision_prototypes(config, params, label_set)
    return protos


def _provision_prototypes(config, params, label_set) -> list[Prototype]:
    if config.mode == "preced_provis":
        return encode_provision_prototypes(label_set, params)
    if config.mode == "frozen" and config.provision_embedding_file:
        table = read_embedding_map(config.provision_embedding_file)
        missing = [k for k in label_set.keys() if k not in table]
        if missing:
            raise ConfigError(f"provision embedding file lacks labels: {missing}")
        return [
            Prototype(i, KIND_PROVISION, table[key], key)
            for i, key in enumerate(label_set.keys())
        ]
    return []


def _recluster(config, params, tr, label_set, epoch, diagnostics) -> list[Prototype]:
    diagnostics["recluster_epochs"].append(epoch)
    round_index = len(diagnostics["recluster_epochs"])
    return _discover(config, params, tr, label_set, round_index, diagnostics)


def _column_keys(prototypes: Sequence[Prototype], head_features: str) -> list[tuple]:
    keys = []
    slot_counter: dict[int, int] = {}
    for p in prototypes:
        if p.kind == KIND_PRECEDENT:
            slot = slot_counter.get(p.label_index, 0)
            slot_counter[p.label_index] = slot + 1
            keys.append((KIND_PRECEDENT, p.label_index, slot))
        elif head_features == HEAD_FEATURES_ALL:
            keys.append((KIND_PROVISION, p.label_index, 0))
    return keys


def _remap_head(head: ClassifierHead, prototypes, config, params) -> ClassifierHead:
    """Keep head columns for surviving (kind, label, slot) identities;
    new columns start at zero."""
    new_keys = _column_keys(prototypes, config.head_features)
    old = getattr(head, "_column_keys", None)
    weight = np.zeros((head.weight.shape[0], len(new_keys)))
    if old is not None:
        index = {key: i for i, key in enumerate(old)}
        for j, key in enumerate(new_keys):
            if key in index:
                weight[:, j] = head.weight[:, index[key]]
    elif head.weight.shape[1] == len(new_keys):
        weight = head.weight.copy()
    new_head = ClassifierHead(weight, head.bias.copy())
    new_head._column_keys = new_keys
    return new_head


def _feature_count(config, prototypes, params) -> int:
    if config.mode == "vanilla":
        return params.embed_dim
    bank = PrototypeBank.from_prototypes(prototypes, params.embed_dim)
    if config.head_features == HEAD_FEATURES_PRECEDENT:
        return len(bank.precedent)
    return bank.n_features_all


def _train_step(config, params, head, prototypes, tr: _Split, idx) -> dict:
    E, cache = _embed(config, params, tr, idx)
    Y = tr.labels[idx]
    lr = config.learning_rate
    if config.mode == "vanilla":
        value, d_features, d_w, d_b = bce_on_features(E, Y, head)
        _sgd_head(head, d_w, d_b, config)
        grad_weight, grad_bias = encode_backward(d_features, cache)
        params.weight *= 1.0 - lr * config.weight_decay
        params.weight -= lr * grad_weight
        params.bias -= lr * grad_bias
        return {"bce": value, "d_preced": 0.0, "d_provis": 0.0, "total": value}

    bank = PrototypeBank.from_prototypes(prototypes, params.embed_dim)
    total, breakdown, fcache = loss_forward(E, Y, bank, head, config.weights, config.head_features)
    grads = loss_backward(fcache)
    _sgd_head(head, grads["d_head_weight"], grads["d_head_bias"], config)
    if config.mode != "frozen":
        grad_weight, grad_bias = encode_backward(grads["d_embeddings"], cache)
        params.weight *= 1.0 - lr * config.weight_decay
        params.weight -= lr * grad_weight
        params.bias -= lr * grad_bias
        precedent_rows = [p for p in prototypes if p.kind == KIND_PRECEDENT]
        for row, proto in enumerate(precedent_rows):
            proto.vector = proto.vector - lr * grads["d_precedent"][row]
    return breakdown


def _sgd_head(head: ClassifierHead, d_weight, d_bias, config) -> None:
    head.weight *= 1.0 - config.learning_rate * config.weight_decay
    head.weight -= config.learning_rate * d_weight
    head.bias -= config.learning_rate * d_bias


def _similarities(E: np.ndarray, bank: PrototypeBank, checkpoint: Checkpoint) -> np.ndarray:
    """Similarity vector to every prototype (dump order), for explanations."""
    if bank.n_features_all == 0:
        return np.zeros((len(E), 0))
    parts = []
    if len(bank.precedent):
        parts.append(kernels.similarity_forward(E, bank.precedent, checkpoint.epsilon)[0])
    if len(bank.provision):
        parts.append(kernels.similarity_forward(E, bank.provision, checkpoint.epsilon)[0])
    return np.concatenate(parts, axis=1)


def _prediction_features(E, sims, checkpoint: Checkpoint, bank: PrototypeBank) -> np.ndarray:
    if checkpoint.mode == "vanilla":
        return E
    if checkpoint.head_features == HEAD_FEATURES_PRECEDENT:
        return sims[:, : len(bank.precedent)]
    return sims


def _validate(config, params, head, prototypes, va: _Split) -> float:
    E, _ = _embed(config, params, va)
    if config.mode == "vanilla":
        scores = head_scores(E, head)
    else:
        bank = PrototypeBank.from_prototypes(prototypes, params.embed_dim)
        sims = []
        if len(bank.precedent):
            sims.append(kernels.similarity_forward(E, bank.precedent, config.weights.epsilon)[0])
        if len(bank.provision) and config.head_features == HEAD_FEATURES_ALL:
            sims.append(kernels.similarity_forward(E, bank.provision, config.weights.epsilon)[0])
        features = np.concatenate(sims, axis=1) if sims else np.zeros((len(E), 0))
        scores = head_scores(features, head)
    predictions = (scores >= PREDICTION_THRESHOLD).astype(np.uint8)
    return f1_report(predictions, va.labels).macro_f1


def _snapshot(config, params, head, prototypes, label_set, epoch, val_f1) -> Checkpoint:
    return Checkpoint(
        mode=config.mode,
        params=params.copy(),
        head=head.copy(),
        head_features=config.head_features,
        prototypes=[Prototype(p.label_index, p.kind, p.vector.copy(), p.source) for p in prototypes],
        epoch=epoch,
        val_macro_f1=val_f1,
        n_labels=label_set.n,
        epsilon=config.weights.epsilon,
    )


# -- checkpoint serialization ------------------------------------------------


class CheckpointError(ValueError):
    pass


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    """Versioned single-file binary; save -> load round-trips bit-exactly."""
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<I", _VERSION)
    _put_str(out, checkpoint.mode)
    _put_str(out, checkpoint.head_features)
    out += struct.pack("<IdId", checkpoint.epoch, checkpoint.val_macro_f1,
                       checkpoint.n_labels, checkpoint.epsilon)
    p = checkpoint.params
    out += struct.pack("<IIq", p.hash_dim, p.embed_dim, p.seed)
    _put_array(out, p.weight)
    _put_array(out, p.bias)
    out += struct.pack("<II", *checkpoint.head.weight.shape)
    _put_array(out, checkpoint.head.weight)
    _put_array(out, checkpoint.head.bias)
    out += struct.pack("<I", len(checkpoint.prototypes))
    for proto in checkpoint.prototypes:
        out += struct.pack("<IB", proto.label_index, 0 if proto.kind == KIND_PRECEDENT else 1)
        _put_str(out, proto.source)
        out += struct.pack("<I", proto.vector.size)
        _put_array(out, proto.vector)
    Path(path).write_bytes(bytes(out))


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    view = memoryview(raw)
    if raw[:4] != _MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:4]!r}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != _VERSION:
        raise CheckpointError(f"{path}: version {version}, expected {_VERSION}")
    pos = 8
    mode, pos = _get_str(raw, pos)
    head_features, pos = _get_str(raw, pos)
    epoch, val_f1, n_labels, epsilon = struct.unpack_from("<IdId", raw, pos)
    pos += struct.calcsize("<IdId")
    hash_dim, embed_dim, seed = struct.unpack_from("<IIq", raw, pos)
    pos += struct.calcsize("<IIq")
    weight, pos = _get_array(view, pos, (embed_dim, hash_dim))
    bias, pos = _get_array(view, pos, (embed_dim,))
    params = EncoderParams(hash_dim, embed_dim, weight, bias, seed)
    hn, hf = struct.unpack_from("<II", raw, pos)
    pos += 8
    head_w, pos = _get_array(view, pos, (hn, hf))
    head_b, pos = _get_array(view, pos, (hn,))
    head = ClassifierHead(head_w, head_b)
    (count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    prototypes = []
    for _ in range(count):
        label, kind_code = struct.unpack_from("<IB", raw, pos)
        pos += 5
        source, pos = _get_str(raw, pos)
        (dim,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        vector, pos = _get_array(view, pos, (dim,))
        prototypes.append(
            Prototype(label, KIND_PRECEDENT if kind_code == 0 else KIND_PROVISION, vector, source)
        )
    if pos != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - pos} trailing bytes")
    checkpoint = Checkpoint(mode, params, head, head_features, prototypes, epoch, val_f1, n_labels, epsilon)
    head._column_keys = _column_keys(prototypes, head_features)
    return checkpoint


def _put_str(out: bytearray, s: str) -> None:
    data = s.encode("utf-8")
    out += struct.pack("<I", len(data))
    out += data


def _get_str(raw: bytes, pos: int) -> tuple[str, int]:
    (length,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    return raw[pos : pos + length].decode("utf-8"), pos + length


def _put_array(out: bytearray, arr: np.ndarray) -> None:
    out += np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _get_array(view: memoryview, pos: int, shape: tuple) -> tuple[np.ndarray, int]:
    count = int(np.prod(shape)) if shape else 0
    nbytes = 8 * count
    if pos + nbytes > len(view):
        raise CheckpointError("truncated checkpoint")
    arr = np.frombuffer(view, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
    return arr, pos + nbytes
