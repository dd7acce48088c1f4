"""Decoder-only transformer forward pass and its weights container.

The model consumes a sequence of (token id, age) pairs. Continuous age
replaces ordinal positional encoding: the embedding at each position is
``tok_emb[id] + (age / age_scale) * age_emb``, because positions in a health
trajectory are temporal, not ordinal. A stack of pre-norm blocks
(causal self-attention, then a GELU MLP, each with a residual connection)
feeds a final LayerNorm and a linear head that scores every vocabulary token.

All arithmetic is 32-bit floating point with a fixed reduction order, so two
forward calls on identical inputs are bit-identical.

Archive file format (little-endian throughout):

    bytes 0..4    magic ``DTW1``
    bytes 4..8    uint32 header length H
    bytes 8..8+H  UTF-8 JSON: {"config": {...}, "tensors": [{name, shape,
                  offset, length}, ...]}
    remainder     concatenated raw float32 tensor data; offsets are relative
                  to the end of the header

The tensor list is closed: an archive must contain exactly the names in
:meth:`ModelConfig.tensor_shapes`, nothing more, nothing less. A closed list
is what makes the file loadable bit-exactly from any language.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import BinaryIO, Optional, Union

import numpy as np
from scipy.special import erf

MAGIC = b"DTW1"

_SQRT2 = np.float32(np.sqrt(2.0))
_LN_EPS = 1e-5


class ArchiveError(ValueError):
    """Malformed or inconsistent weights archive; names the offender."""


class SequenceError(ValueError):
    """Input sequence violates the model's contract."""


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters; fully determine the tensor manifest."""

    vocab_size: int
    n_layer: int
    n_head: int
    n_embd: int
    max_seq: int
    age_scale: float = 100.0

    def __post_init__(self):
        for name in ("vocab_size", "n_layer", "n_head", "n_embd"):
            if getattr(self, name) < 1:
                raise ArchiveError(f"config: {name} must be positive")
        if self.max_seq < 2:
            raise ArchiveError("config: max_seq must be >= 2")
        if self.n_embd % self.n_head != 0:
            raise ArchiveError(
                f"config: n_embd={self.n_embd} not divisible by n_head={self.n_head}"
            )
        if not (self.age_scale > 0 and np.isfinite(self.age_scale)):
            raise ArchiveError("config: age_scale must be positive and finite")

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        """The closed tensor manifest: name -> required shape."""
        e, v = self.n_embd, self.vocab_size
        shapes: dict[str, tuple[int, ...]] = {
            "tok_emb.weight": (v, e),
            "age_emb.weight": (e,),
            "ln_f.gain": (e,),
            "ln_f.bias": (e,),
            "head.weight": (v, e),
        }
        for i in range(self.n_layer):
            p = f"blk.{i}."
            shapes[p + "ln1.gain"] = (e,)
            shapes[p + "ln1.bias"] = (e,)
            shapes[p + "attn.wq"] = (e, e)
            shapes[p + "attn.wk"] = (e, e)
            shapes[p + "attn.wv"] = (e, e)
            shapes[p + "attn.wo"] = (e, e)
            shapes[p + "ln2.gain"] = (e,)
            shapes[p + "ln2.bias"] = (e,)
            shapes[p + "mlp.w1"] = (4 * e, e)
            shapes[p + "mlp.b1"] = (4 * e,)
            shapes[p + "mlp.w2"] = (e, 4 * e)
            shapes[p + "mlp.b2"] = (e,)
        return shapes

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "n_layer": self.n_layer,
            "n_head": self.n_head,
            "n_embd": self.n_embd,
            "max_seq": self.max_seq,
            "age_scale": self.age_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        try:
            return cls(
                vocab_size=int(d["vocab_size"]),
                n_layer=int(d["n_layer"]),
                n_head=int(d["n_head"]),
                n_embd=int(d["n_embd"]),
                max_seq=int(d["max_seq"]),
                age_scale=float(d["age_scale"]),
            )
        except KeyError as exc:
            raise ArchiveError(f"config: missing field {exc.args[0]!r}") from None


class WeightsArchive:
    """Validated, immutable set of named float32 tensors plus config.

    Arrays are marked read-only; the archive is shareable across threads and
    :func:`forward` is a pure function of (sequence, archive).
    """

    def __init__(self, config: ModelConfig, tensors: dict[str, np.ndarray]):
        shapes = config.tensor_shapes()
        missing = sorted(shapes.keys() - tensors.keys())
        if missing:
            raise ArchiveError(f"missing tensor {missing[0]!r}")
        extra = sorted(tensors.keys() - shapes.keys())
        if extra:
            raise ArchiveError(f"unexpected tensor {extra[0]!r}")
        normalized: dict[str, np.ndarray] = {}
        for name, want in shapes.items():
            arr = np.asarray(tensors[name], dtype=np.float32)
            if arr.shape != want:
                raise ArchiveError(
                    f"tensor {name!r}: shape {arr.shape} does not match required {want}"
                )
            if not np.all(np.isfinite(arr)):
                raise ArchiveError(f"tensor {name!r}: contains non-finite values")
            arr = arr.copy()
            arr.flags.writeable = False
            normalized[name] = arr
        self.config = config
        self.tensors = normalized
        # merged projection per block: one (L,E)@(E,3E) matmul instead of three
        self._qkv = []
        for i in range(config.n_layer):
            p = f"blk.{i}.attn."
            merged = np.concatenate(
                [normalized[p + "wq"], normalized[p + "wk"], normalized[p + "wv"]],
                axis=0,
            )
            merged.flags.writeable = False
            self._qkv.append(merged)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


@dataclass
class EncodedSequence:
    """Model-ready input: token ids and ages in years, one per position."""

    token_ids: np.ndarray
    ages: np.ndarray

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.int64)
        self.ages = np.asarray(self.ages, dtype=np.float64)
        if self.token_ids.ndim != 1 or self.ages.ndim != 1:
            raise SequenceError("token_ids and ages must be 1-D")
        if self.token_ids.shape[0] != self.ages.shape[0]:
            raise SequenceError(
                f"length mismatch: {self.token_ids.shape[0]} ids vs "
                f"{self.ages.shape[0]} ages"
            )
        if self.token_ids.shape[0] < 1:
            raise SequenceError("sequence must be non-empty")
        if not np.all(np.isfinite(self.ages)):
            raise SequenceError("ages contain non-finite values")
        if np.any(np.diff(self.ages) < 0):
            raise SequenceError("ages must be nondecreasing")

    def __len__(self) -> int:
        return int(self.token_ids.shape[0])

    @classmethod
    def _trusted(cls, token_ids: np.ndarray, ages: np.ndarray) -> "EncodedSequence":
        # fast path for hot loops; the caller guarantees the invariants
        obj = object.__new__(cls)
        obj.token_ids = token_ids
        obj.ages = ages
        return obj


def save_weights(
    archive: WeightsArchive, dest: Union[str, "os.PathLike[str]", BinaryIO]
) -> None:
    """Write the canonical archive file.

    Tensors are laid out in manifest order with a compact JSON header, so
    saving the result of a load reproduces the original bytes.
    """
    names = list(archive.config.tensor_shapes().keys())
    manifest = []
    offset = 0
    blobs = []
    for name in names:
        arr = archive.tensors[name]
        raw = arr.astype("<f4", copy=False).tobytes(order="C")
        manifest.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "offset": offset,
                "length": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"config": archive.config.to_dict(), "tensors": manifest},
        separators=(",", ":"),
    ).encode("utf-8")

    own = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "wb") if own else dest
    try:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(4, "little"))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)
    finally:
        if own:
            fh.close()


def load_weights(
    source: Union[str, "os.PathLike[str]", bytes, BinaryIO]
) -> WeightsArchive:
    """Read and fully validate an archive file.

    Every failure mode (bad magic, missing/extra/misshapen tensor, truncated
    data, non-finite values) raises :class:`ArchiveError` naming the
    offending tensor. Loading is side-effect free.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()

    if len(data) < 8:
        raise ArchiveError("file too short for magic and header length")
    if data[:4] != MAGIC:
        raise ArchiveError(
            f"bad magic {data[:4]!r}, expected {MAGIC!r} (wrong file or version)"
        )
    header_len = int.from_bytes(data[4:8], "little")
    if 8 + header_len > len(data):
        raise ArchiveError("declared header length exceeds file size")
    try:
        header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"header is not valid JSON: {exc}") from None
    if not isinstance(header, dict) or "config" not in header or "tensors" not in header:
        raise ArchiveError("header must contain 'config' and 'tensors'")

    config = ModelConfig.from_dict(header["config"])
    body = data[8 + header_len :]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        try:
            name = entry["name"]
            shape = tuple(int(s) for s in entry["shape"])
            offset = int(entry["offset"])
            length = int(entry["length"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ArchiveError(f"malformed manifest entry {entry!r}: {exc}") from None
        if name in tensors:
            raise ArchiveError(f"tensor {name!r}: listed twice in manifest")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if length != 4 * count:
            raise ArchiveError(
                f"tensor {name!r}: byte length {length} does not match shape {shape}"
            )
        if offset < 0 or offset + length > len(body):
            raise ArchiveError(f"tensor {name!r}: data range outside file body")
        arr = np.frombuffer(body[offset : offset + length], dtype="<f4").reshape(shape)
        tensors[name] = arr

    return WeightsArchive(config, tensors)


def _layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray) -> np.ndarray:
    inv_n = np.float32(1.0 / x.shape[-1])
    mean = np.add.reduce(x, axis=-1, keepdims=True) * inv_n
    d = x - mean
    var = np.add.reduce(d * d, axis=-1, keepdims=True) * inv_n
    return d / np.sqrt(var + np.float32(_LN_EPS)) * gain + bias


def _gelu(x: np.ndarray) -> np.ndarray:
    # exact (erf) form
    return np.float32(0.5) * x * (np.float32(1.0) + erf(x / _SQRT2))


_mask_cache: dict[int, np.ndarray] = {}


def _causal_mask(L: int) -> np.ndarray:
    # position i attends to j <= i only
    mask = _mask_cache.get(L)
    if mask is None:
        mask = np.tril(np.ones((L, L), dtype=bool))[None, :, :]
        mask.flags.writeable = False
        _mask_cache[L] = mask
    return mask


def _attention(
    x: np.ndarray,
    wqkv: np.ndarray,
    wo: np.ndarray,
    n_head: int,
    attn_out: Optional[list] = None,
) -> np.ndarray:
    L, E = x.shape
    hs = E // n_head
    qkv = x @ wqkv.T
    q = qkv[:, :E].reshape(L, n_head, hs).transpose(1, 0, 2)
    k = qkv[:, E : 2 * E].reshape(L, n_head, hs).transpose(1, 0, 2)
    v = qkv[:, 2 * E :].reshape(L, n_head, hs).transpose(1, 0, 2)
    scores = (q @ k.transpose(0, 2, 1)) * np.float32(1.0 / np.sqrt(hs))
    scores = np.where(_causal_mask(L), scores, np.float32(-np.inf))
    m = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - m)
    probs = e / np.add.reduce(e, axis=-1, keepdims=True)
    if attn_out is not None:
        attn_out.append(probs)
    y = (probs @ v).transpose(1, 0, 2).reshape(L, E)
    return y @ wo.T


def _forward_impl(
    seq: EncodedSequence,
    archive: WeightsArchive,
    attn_collect: Optional[list] = None,
) -> np.ndarray:
    cfg = archive.config
    L = len(seq)
    if L > cfg.max_seq:
        raise SequenceError(f"sequence length {L} exceeds max_seq {cfg.max_seq}")
    ids = seq.token_ids
    if int(ids.min()) < 0 or int(ids.max()) >= cfg.vocab_size:
        bad = int(ids[(ids < 0) | (ids >= cfg.vocab_size)][0])
        raise SequenceError(f"token id {bad} out of range [0, {cfg.vocab_size})")

    t = archive.tensors
    norm_age = (seq.ages.astype(np.float32) / np.float32(cfg.age_scale))[:, None]
    x = t["tok_emb.weight"][ids] + norm_age * t["age_emb.weight"]
    for i in range(cfg.n_layer):
        p = f"blk.{i}."
        x = x + _attention(
            _layer_norm(x, t[p + "ln1.gain"], t[p + "ln1.bias"]),
            archive._qkv[i],
            t[p + "attn.wo"],
            cfg.n_head,
            attn_collect,
        )
        h = _layer_norm(x, t[p + "ln2.gain"], t[p + "ln2.bias"])
        h = _gelu(h @ t[p + "mlp.w1"].T + t[p + "mlp.b1"])
        x = x + (h @ t[p + "mlp.w2"].T + t[p + "mlp.b2"])
    x = _layer_norm(x, t["ln_f.gain"], t["ln_f.bias"])
    return x @ t["head.weight"].T


def forward(seq: EncodedSequence, archive: WeightsArchive) -> np.ndarray:
    """Logits for every position: float32 array of shape (L, vocab_size)."""
    return _forward_impl(seq, archive)


def forward_with_attention(
    seq: EncodedSequence, archive: WeightsArchive
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Debug path: logits plus per-layer post-softmax attention tensors.

    Attention tensors have shape (n_head, L, L); numerics are identical to
    :func:`forward`, the probabilities are merely retained.
    """
    collected: list[np.ndarray] = []
    logits = _forward_impl(seq, archive, collected)
    return logits, collected


def get_logits(seq: EncodedSequence, archive: WeightsArchive) -> np.ndarray:
    """Logits at the last position only: float32 array of shape (vocab_size,)."""
    return forward(seq, archive)[-1]
