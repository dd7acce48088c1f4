"""Desk-scale toy model: a 32-token vocabulary and seeded random weights.

The toy configuration (2 layers, 2 heads, width 16, context 48) is small
enough for exhaustive property testing yet exercises every code path of the
real engine. Weights are drawn once from a seeded generator, so fixtures are
reproducible everywhere.
"""

from __future__ import annotations

from importlib.resources import files

import numpy as np

from .model import ModelConfig, WeightsArchive
from .vocabulary import Vocabulary, load_vocabulary

TOY_CONFIG = ModelConfig(
    vocab_size=32, n_layer=2, n_head=2, n_embd=16, max_seq=48, age_scale=100.0
)


def toy_vocab_bytes() -> bytes:
    return files("trajgen.data").joinpath("toy_vocab.tsv").read_bytes()


def toy_vocabulary() -> Vocabulary:
    return load_vocabulary(toy_vocab_bytes())


def random_archive(config: ModelConfig = TOY_CONFIG, seed: int = 0) -> WeightsArchive:
    """Random weights with GPT-style init: N(0, 0.02) matrices, unit norms."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in config.tensor_shapes().items():
        if name.endswith(".gain"):
            arr = np.ones(shape, dtype=np.float32)
        elif name.endswith((".bias", ".b1", ".b2")):
            arr = np.zeros(shape, dtype=np.float32)
        else:
            arr = rng.normal(0.0, 0.02, size=shape).astype(np.float32)
        tensors[name] = arr
    return WeightsArchive(config, tensors)


def biased_archive(
    target_id: int,
    high: float = 10.0,
    low: float = -10.0,
    config: ModelConfig = TOY_CONFIG,
) -> WeightsArchive:
    """All-zero model whose logits are exactly ``low`` except ``high`` at target.

    With zero blocks and zero embeddings the pre-head activations equal
    ``ln_f.bias``; picking bias = e0 and writing the desired logits into the
    head's first column makes the output analytic, handy for sanity tests.
    """
    if not 0 <= target_id < config.vocab_size:
        raise ValueError(f"target_id {target_id} out of range")
    tensors = {
        name: np.zeros(shape, dtype=np.float32)
        for name, shape in config.tensor_shapes().items()
    }
    bias = np.zeros(config.n_embd, dtype=np.float32)
    bias[0] = 1.0
    tensors["ln_f.bias"] = bias
    head = np.zeros((config.vocab_size, config.n_embd), dtype=np.float32)
    head[:, 0] = low
    head[target_id, 0] = high
    tensors["head.weight"] = head
    return WeightsArchive(config, tensors)
