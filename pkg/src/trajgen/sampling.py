"""Competing-exponential next-event sampling.

Each vocabulary token is treated as a competing risk with rate
``exp(logit)``. One waiting time is drawn per candidate token,

    t = -exp(-logit) * ln(u),        u ~ Uniform(0, 1)

and the token with the minimal time wins. The argmin of independent
exponentials with rates ``lambda_i`` lands on token k with probability
``lambda_k / sum(lambda_j)``, i.e. exactly the softmax of the logits, so
:func:`next_event_distribution` is the analytic counterpart of the sampler.

Randomness comes from a splitmix64 stream: portable, seedable, and cheap
enough to replay bit-exactly in another language. Uniform draws are consumed
in ascending token-id order (masked tokens consume nothing) so a (logits,
seed, mask) triple fully determines the outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import AbstractSet

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15  # splitmix64 state increment
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    """splitmix64 output finalizer on a 64-bit value."""
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class RandomStream:
    """Deterministic splitmix64 uniform stream.

    Single-owner mutable state: never share one stream between concurrent
    generations. Uniforms lie strictly inside (0, 1), so ``ln(u)`` is always
    finite and negative.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_raw(self) -> int:
        """Advance and return the next raw 64-bit output."""
        self.state = (self.state + _GAMMA) & _MASK64
        return _mix64(self.state)

    def next_uniform(self) -> float:
        """Next uniform in the open interval (0, 1).

        The top 53 bits of the raw output are offset by half a step, mapping
        onto {0.5, 1.5, ...} * 2^-53, which excludes both endpoints.
        """
        return ((self.next_raw() >> 11) + 0.5) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        """Vectorized batch: identical to ``n`` calls of :meth:`next_uniform`.

        Advances the stream by ``n``. Used on hot paths; the scalar and batch
        forms are interchangeable draw-for-draw.
        """
        if n < 0:
            raise ValueError(f"n must be >= 0, got {n}")
        if n == 0:
            return np.empty(0, dtype=np.float64)
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
            z = np.uint64(self.state) + steps
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GAMMA) & _MASK64
        return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def derive_seed(seed: int, index: int) -> int:
    """Per-sample seed: the ``index+1``-th raw splitmix64 output of ``seed``.

    A single mix step keeps derived seeds reproducible independently of
    execution order and worker count.
    """
    if index < 0:
        raise ValueError(f"index must be >= 0, got {index}")
    return _mix64((seed + (index + 1) * _GAMMA) & _MASK64)


@dataclass(frozen=True)
class SampleOutcome:
    """Winning token of one competing-exponential draw and its wait in years."""

    token: int
    wait_years: float


def waiting_time(logit: float, u: float) -> float:
    """One waiting time in years: ``-exp(-logit) * ln(u)``."""
    return -math.exp(-logit) * math.log(u)


def sample_waiting_times(
    logits: np.ndarray,
    stream: RandomStream,
    mask: AbstractSet[int] = frozenset(),
) -> np.ndarray:
    """Draw one waiting time per token; masked tokens get ``+inf``.

    One uniform is consumed per unmasked token, in ascending token-id order.
    Masked tokens stay at ``+inf`` rather than being removed, preserving
    index alignment with the vocabulary.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ValueError(f"logits must be 1-D, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits contain non-finite values")
    n = logits.shape[0]
    unmasked = np.array([i for i in range(n) if i not in mask], dtype=np.intp)
    if unmasked.size == 0:
        raise ValueError("all tokens are masked")
    u = stream.uniforms(unmasked.size)
    times = np.full(n, np.inf, dtype=np.float64)
    times[unmasked] = -np.exp(-logits[unmasked]) * np.log(u)
    return times


def select_next(times: np.ndarray) -> SampleOutcome:
    """Pick the token with the minimal waiting time.

    Ties break to the lowest token id; with continuous draws a tie has
    probability zero, the rule just pins the behavior.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.size == 0 or not np.any(np.isfinite(times)):
        raise ValueError("no finite waiting time to select from")
    token = int(np.argmin(times))  # argmin returns the first minimum
    return SampleOutcome(token=token, wait_years=float(times[token]))


def sample_many(
    logits: np.ndarray,
    stream: RandomStream,
    mask: AbstractSet[int] = frozenset(),
    n: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """``n`` independent draws from one logit vector, batched.

    Trial k consumes the same uniforms, in the same order, as the k-th
    sequential call of :func:`sample_waiting_times` + :func:`select_next`,
    so results are draw-for-draw identical to the scalar path. Returns
    (token ids, waiting times).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits contain non-finite values")
    k = logits.shape[0]
    unmasked = np.array([i for i in range(k) if i not in mask], dtype=np.intp)
    if unmasked.size == 0:
        raise ValueError("all tokens are masked")
    u = stream.uniforms(n * unmasked.size).reshape(n, unmasked.size)
    times = -np.exp(-logits[unmasked])[None, :] * np.log(u)
    cols = np.argmin(times, axis=1)
    tokens = unmasked[cols]
    waits = times[np.arange(n), cols]
    return tokens, waits


def next_event_distribution(
    logits: np.ndarray,
    mask: AbstractSet[int] = frozenset(),
) -> np.ndarray:
    """Masked softmax of the logits, the sampler's analytic selection law.

    Computed with max-subtraction for stability; masked entries are exactly 0.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ValueError(f"logits must be 1-D, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits contain non-finite values")
    n = logits.shape[0]
    keep = np.array([i for i in range(n) if i not in mask], dtype=np.intp)
    if keep.size == 0:
        raise ValueError("all tokens are masked")
    sub = logits[keep]
    e = np.exp(sub - np.max(sub))
    probs = np.zeros(n, dtype=np.float64)
    probs[keep] = e / np.sum(e)
    return probs
