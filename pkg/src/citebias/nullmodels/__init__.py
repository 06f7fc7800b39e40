"""Reference models that rewire citations: random, homophilic and preferential draws."""

from .index import (
    AttributeKey,
    CandidateIndex,
    PdState,
    eligible_targets_hd,
    eligible_targets_pd,
    eligible_targets_rd,
    log_bin,
)
from .randomize import (
    MODELS,
    PD_TIE_BREAK,
    RNG_DESCRIPTION,
    DrawTrace,
    RandomizedNetwork,
    ReplicateSummary,
    edge_uniforms,
    normalize_model,
    randomize,
    run_replicates,
    write_replicate_summaries,
    write_trace,
)

__all__ = [
    "AttributeKey",
    "CandidateIndex",
    "DrawTrace",
    "MODELS",
    "PD_TIE_BREAK",
    "PdState",
    "RNG_DESCRIPTION",
    "RandomizedNetwork",
    "ReplicateSummary",
    "edge_uniforms",
    "eligible_targets_hd",
    "eligible_targets_pd",
    "eligible_targets_rd",
    "log_bin",
    "normalize_model",
    "randomize",
    "run_replicates",
    "write_replicate_summaries",
    "write_trace",
]
