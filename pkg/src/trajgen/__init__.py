"""trajgen: generative disease-trajectory engine.

Autoregressively extends a patient's (ICD-10 event, age) timeline with a
decoder-only transformer and competing-exponential time-to-event sampling,
aggregates Monte Carlo samples into risk estimates, and serves everything
from a local-only HTTP service and CLI.
"""

from .generation import (
    GenerationError,
    GenerationParams,
    HealthEvent,
    RiskEstimate,
    Trajectory,
    encode_for_model,
    estimate_risk,
    generate_samples,
    generate_trajectory,
    risk_from_samples,
    trajectory_from_doc,
    trajectory_to_doc,
    validate_trajectory,
)
from .model import (
    ArchiveError,
    EncodedSequence,
    ModelConfig,
    SequenceError,
    WeightsArchive,
    forward,
    forward_with_attention,
    get_logits,
    load_weights,
    save_weights,
)
from .sampling import (
    RandomStream,
    SampleOutcome,
    derive_seed,
    next_event_distribution,
    sample_many,
    sample_waiting_times,
    select_next,
    waiting_time,
)
from .vocabulary import (
    Token,
    TokenKind,
    UnknownCodeError,
    Vocabulary,
    VocabularyError,
    dump_vocabulary,
    load_vocabulary,
)

__version__ = "0.1.0"

__all__ = [
    "ArchiveError",
    "EncodedSequence",
    "GenerationError",
    "GenerationParams",
    "HealthEvent",
    "ModelConfig",
    "RandomStream",
    "RiskEstimate",
    "SampleOutcome",
    "SequenceError",
    "Token",
    "TokenKind",
    "Trajectory",
    "UnknownCodeError",
    "Vocabulary",
    "VocabularyError",
    "WeightsArchive",
    "derive_seed",
    "dump_vocabulary",
    "encode_for_model",
    "estimate_risk",
    "forward",
    "forward_with_attention",
    "generate_samples",
    "generate_trajectory",
    "get_logits",
    "load_vocabulary",
    "load_weights",
    "next_event_distribution",
    "risk_from_samples",
    "sample_many",
    "sample_waiting_times",
    "save_weights",
    "select_next",
    "trajectory_from_doc",
    "trajectory_to_doc",
    "validate_trajectory",
    "waiting_time",
]
