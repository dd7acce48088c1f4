"""Iterative trajectory generation and Monte Carlo risk estimation.

The core loop extends a patient's (event, age) timeline one event at a time:
encode the current trajectory, run the model for last-position logits, draw a
competing-exponential (token, waiting time) pair, advance the age by the wait
and append. Generation stops when a termination token (``DEATH`` by default)
is produced, when the next event would land past the maximum age (85 years by
default), or after ``max_steps`` events as a hard safety cap.

Everything downstream of a fixed (input, params, model) triple is
deterministic: one splitmix64 stream per generation, per-sample seeds derived
by a single mix step so a batch of samples is reproducible regardless of
worker count or scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import AbstractSet, Iterable, Optional, Sequence

import numpy as np

from .model import EncodedSequence, WeightsArchive, get_logits
from .sampling import RandomStream, derive_seed, sample_many
from .vocabulary import TokenKind, Vocabulary

MAX_AGE_YEARS_DEFAULT = 85.0
MAX_STEPS_DEFAULT = 256
_AGE_CEILING = 130.0


class GenerationError(ValueError):
    """Invalid trajectory or generation precondition violation."""


@dataclass(frozen=True)
class HealthEvent:
    """One timeline entry: a vocabulary token observed at an age in years."""

    token: int
    age_years: float


@dataclass(frozen=True)
class Trajectory:
    """Ordered (token, age) timeline; ages nondecreasing."""

    events: tuple[HealthEvent, ...]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "Trajectory":
        return cls(tuple(HealthEvent(int(t), float(a)) for t, a in pairs))

    def last_age(self) -> float:
        return self.events[-1].age_years

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class GenerationParams:
    """Stochastic-run controls.

    ``termination_tokens`` and ``mask`` default to None, resolved against the
    vocabulary at generation time: all terminal-kind tokens terminate, all
    padding-kind tokens are masked from sampling.
    """

    seed: int
    max_age_years: float = MAX_AGE_YEARS_DEFAULT
    max_steps: int = MAX_STEPS_DEFAULT
    termination_tokens: Optional[frozenset[int]] = None
    mask: Optional[frozenset[int]] = None

    def __post_init__(self):
        if not (self.max_age_years > 0 and math.isfinite(self.max_age_years)):
            raise GenerationError("max_age_years must be positive and finite")
        if self.max_age_years > _AGE_CEILING:
            # events are capped at 130 years; a higher limit could generate
            # trajectories that violate their own invariants
            raise GenerationError(f"max_age_years must be <= {_AGE_CEILING}")
        if self.max_steps < 1:
            raise GenerationError("max_steps must be >= 1")
        if self.termination_tokens is not None and not self.termination_tokens:
            raise GenerationError("termination_tokens must be non-empty")


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo probability that a target occurs by a horizon age."""

    target: int
    horizon_age_years: float
    probability: float
    n_samples: int
    std_error: float


def validate_trajectory(traj: Trajectory, vocab: Vocabulary) -> None:
    """Check the trajectory invariants, raising :class:`GenerationError`.

    Ages nondecreasing and within [0, 130]; no padding tokens; at most one
    terminal token and only at the final position.
    """
    if not traj.events:
        raise GenerationError("trajectory is empty")
    prev_age = None
    for pos, ev in enumerate(traj.events):
        if not (0 <= ev.token < len(vocab)):
            raise GenerationError(
                f"event {pos}: token id {ev.token} out of range [0, {len(vocab)})"
            )
        if not (math.isfinite(ev.age_years) and 0.0 <= ev.age_years <= _AGE_CEILING):
            raise GenerationError(
                f"event {pos}: age {ev.age_years} outside [0, {_AGE_CEILING}]"
            )
        if prev_age is not None and ev.age_years < prev_age:
            raise GenerationError(
                f"event {pos}: age {ev.age_years} decreases from {prev_age}"
            )
        prev_age = ev.age_years
        kind = vocab.decode(ev.token).kind
        if kind is TokenKind.PADDING:
            raise GenerationError(f"event {pos}: padding token in trajectory")
        if kind is TokenKind.TERMINAL and pos != len(traj.events) - 1:
            raise GenerationError(
                f"event {pos}: terminal token before the final position"
            )


def _window_indices(is_static: Sequence[bool], max_seq: int) -> list[int]:
    """Positions to keep when a trajectory overflows the context window.

    All static positions survive plus the most recent others up to
    ``max_seq``, emitted in original order; the oldest non-static positions
    are dropped. Keeping original order preserves nondecreasing ages (any
    subsequence of a sorted sequence is sorted).
    """
    static_pos = [i for i, s in enumerate(is_static) if s]
    other_pos = [i for i, s in enumerate(is_static) if not s]
    budget = max_seq - len(static_pos)
    if budget >= 0:
        return sorted(static_pos + other_pos[len(other_pos) - budget :])
    # degenerate: statics alone overflow the window; keep the latest ones
    return static_pos[len(static_pos) - max_seq :]


def encode_for_model(
    traj: Trajectory, vocab: Vocabulary, max_seq: int
) -> tuple[EncodedSequence, bool]:
    """Turn a trajectory into model input, truncating to the context window.

    When the trajectory exceeds ``max_seq``, all static-kind tokens are kept
    (they carry time-invariant facts such as sex) together with the most
    recent other events; the oldest non-static events are dropped. Returns
    the sequence and a flag saying whether truncation happened.
    """
    ids = [ev.token for ev in traj.events]
    ages = [ev.age_years for ev in traj.events]
    if len(ids) <= max_seq:
        return EncodedSequence(np.array(ids), np.array(ages)), False

    static_ids = vocab.static_ids
    keep = _window_indices([t in static_ids for t in ids], max_seq)
    kept_ids = [ids[i] for i in keep]
    kept_ages = [ages[i] for i in keep]
    return EncodedSequence(np.array(kept_ids), np.array(kept_ages)), True


def _resolve(params: GenerationParams, vocab: Vocabulary) -> tuple[frozenset[int], frozenset[int]]:
    term = params.termination_tokens
    if term is None:
        term = vocab.terminal_ids
    if not term:
        raise GenerationError("no termination tokens available")
    for t in term:
        if not 0 <= t < len(vocab):
            raise GenerationError(f"termination token id {t} out of range")
        if vocab.decode(t).kind is not TokenKind.TERMINAL:
            # only terminal-kind tokens are eligible to end a trajectory
            raise GenerationError(
                f"token {vocab.decode(t).code!r} is not terminal-kind and "
                "cannot be a termination token"
            )
    mask = params.mask if params.mask is not None else vocab.padding_ids
    return frozenset(term), frozenset(mask)


def _check_input(
    traj: Trajectory, params: GenerationParams, vocab: Vocabulary
) -> None:
    validate_trajectory(traj, vocab)
    _resolve(params, vocab)
    for pos, ev in enumerate(traj.events):
        if vocab.decode(ev.token).kind is TokenKind.TERMINAL:
            raise GenerationError(f"input trajectory already terminated at event {pos}")
    if traj.last_age() >= params.max_age_years:
        raise GenerationError(
            f"last input age {traj.last_age()} must be below "
            f"max_age_years {params.max_age_years}"
        )


def generate_trajectory(
    input_traj: Trajectory,
    params: GenerationParams,
    archive: WeightsArchive,
    vocab: Vocabulary,
) -> Trajectory:
    """Extend the input timeline until termination; returns input + new events.

    The output always begins with the input verbatim, every appended age
    strictly exceeds its predecessor and never exceeds ``max_age_years``, and
    a termination token, if generated, is appended and ends the trajectory.
    """
    _check_input(input_traj, params, vocab)
    term, mask = _resolve(params, vocab)
    stream = RandomStream(params.seed)
    max_seq = archive.config.max_seq
    static_ids = vocab.static_ids

    # grow-in-place buffers; the step cap bounds the final length
    cap = len(input_traj.events) + params.max_steps
    ids = np.empty(cap, dtype=np.int64)
    ages = np.empty(cap, dtype=np.float64)
    is_static = [False] * cap
    for i, ev in enumerate(input_traj.events):
        ids[i] = ev.token
        ages[i] = ev.age_years
        is_static[i] = ev.token in static_ids
    length = len(input_traj.events)

    appended: list[HealthEvent] = []
    for _ in range(params.max_steps):
        if length <= max_seq:
            seq = EncodedSequence._trusted(ids[:length], ages[:length])
        else:
            keep = _window_indices(is_static[:length], max_seq)
            seq = EncodedSequence._trusted(ids[keep], ages[keep])
        logits = get_logits(seq, archive)
        tokens, waits = sample_many(logits, stream, mask, n=1)
        token, wait = int(tokens[0]), float(waits[0])
        prev_age = float(ages[length - 1])
        new_age = prev_age + wait
        if new_age <= prev_age:
            # waits are strictly positive but can round away at double
            # precision; bump by one ulp to keep ages strictly increasing
            new_age = math.nextafter(prev_age, math.inf)
        if new_age > params.max_age_years:
            break
        ids[length] = token
        ages[length] = new_age
        is_static[length] = token in static_ids
        length += 1
        appended.append(HealthEvent(token, new_age))
        if token in term:
            break
    return Trajectory(input_traj.events + tuple(appended))


def generate_samples(
    input_traj: Trajectory,
    params: GenerationParams,
    n: int,
    archive: WeightsArchive,
    vocab: Vocabulary,
    workers: int = 1,
) -> list[Trajectory]:
    """Draw ``n`` independent trajectory samples.

    Sample k runs on its own stream seeded with ``derive_seed(seed, k)``, so
    the result list is identical whatever ``workers`` is; threads only buy
    wall-clock time. Results are ordered by sample index.
    """
    if n < 1:
        raise GenerationError(f"n must be >= 1, got {n}")
    _check_input(input_traj, params, vocab)

    def run(k: int) -> Trajectory:
        p = replace(params, seed=derive_seed(params.seed, k))
        return generate_trajectory(input_traj, p, archive, vocab)

    if workers <= 1:
        return [run(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(n)))


def estimate_risk(
    input_traj: Trajectory,
    targets: AbstractSet[int],
    horizon_age_years: float,
    params: GenerationParams,
    n: int,
    archive: WeightsArchive,
    vocab: Vocabulary,
    workers: int = 1,
) -> list[RiskEstimate]:
    """Fraction of sampled futures containing each target by the horizon age.

    All estimates come from the same ``n``-sample set, so probabilities for
    nested horizons computed on one run are monotone by construction. Events
    already in the input count: a target present at an age within the horizon
    has probability exactly 1. Returns estimates sorted by target id.
    """
    if not targets:
        raise GenerationError("targets must be non-empty")
    for t in targets:
        if not 0 <= t < len(vocab):
            raise GenerationError(f"target token id {t} out of range [0, {len(vocab)})")
    if not input_traj.events:
        raise GenerationError("trajectory is empty")
    if horizon_age_years <= input_traj.last_age():
        raise GenerationError(
            f"horizon {horizon_age_years} must exceed last input age "
            f"{input_traj.last_age()}"
        )
    samples = generate_samples(input_traj, params, n, archive, vocab, workers=workers)
    return risk_from_samples(samples, targets, horizon_age_years)


def risk_from_samples(
    samples: Sequence[Trajectory],
    targets: AbstractSet[int],
    horizon_age_years: float,
) -> list[RiskEstimate]:
    """Aggregate an existing sample set into per-target risk estimates."""
    n = len(samples)
    estimates = []
    for target in sorted(targets):
        hits = sum(
            1
            for s in samples
            if any(
                ev.token == target and ev.age_years <= horizon_age_years
                for ev in s.events
            )
        )
        p = hits / n
        estimates.append(
            RiskEstimate(
                target=target,
                horizon_age_years=horizon_age_years,
                probability=p,
                n_samples=n,
                std_error=math.sqrt(p * (1.0 - p) / n),
            )
        )
    return estimates


def trajectory_to_doc(
    traj: Trajectory,
    vocab: Vocabulary,
    n_input_events: Optional[int] = None,
    seed: Optional[int] = None,
) -> dict:
    """Interchange document for a trajectory.

    Events at positions >= ``n_input_events`` are flagged ``generated``. The
    document is plain JSON-ready data: codes as strings, ages in years.
    """
    events = []
    for pos, ev in enumerate(traj.events):
        entry: dict = {
            "code": vocab.decode(ev.token).code,
            "age_years": ev.age_years,
        }
        if n_input_events is not None:
            entry["generated"] = pos >= n_input_events
        events.append(entry)
    doc: dict = {}
    if seed is not None:
        doc["seed"] = seed
    doc["events"] = events
    return doc


def trajectory_from_doc(doc, vocab: Vocabulary) -> Trajectory:
    """Parse an interchange document (bare event list or wrapped object)."""
    if isinstance(doc, dict):
        if "events" not in doc:
            raise GenerationError("trajectory document lacks an 'events' list")
        items = doc["events"]
    else:
        items = doc
    if not isinstance(items, list):
        raise GenerationError("trajectory document must be a list of events")
    pairs = []
    for pos, item in enumerate(items):
        if not isinstance(item, dict) or "code" not in item or "age_years" not in item:
            raise GenerationError(
                f"event {pos}: expected an object with 'code' and 'age_years'"
            )
        code = item["code"]
        age = item["age_years"]
        if not isinstance(code, str):
            raise GenerationError(f"event {pos}: 'code' must be a string")
        if not isinstance(age, (int, float)) or isinstance(age, bool):
            raise GenerationError(f"event {pos}: 'age_years' must be a number")
        pairs.append((vocab.encode(code), float(age)))
    traj = Trajectory.from_pairs(pairs)
    validate_trajectory(traj, vocab)
    return traj
