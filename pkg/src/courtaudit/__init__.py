"""Decision-variability auditing for large adjudication corpora."""

__version__ = "0.1.0"

from .records import (
    ClimateKey,
    CohortKey,
    Custody,
    Decision,
    OutOfRangeError,
    Party,
    ProceedingRecord,
    ReferenceTables,
    resolve_climate,
    year_bin,
)
from .scoring import (
    CohortIndex,
    CorpusMismatchError,
    ScoreTable,
    build_index,
    cohort_consistency,
    disaggregated_consistency,
    index_universe,
    partisanship,
    score_corpus,
)

__all__ = [
    "ClimateKey",
    "CohortIndex",
    "CohortKey",
    "CorpusMismatchError",
    "Custody",
    "Decision",
    "OutOfRangeError",
    "Party",
    "ProceedingRecord",
    "ReferenceTables",
    "ScoreTable",
    "build_index",
    "cohort_consistency",
    "disaggregated_consistency",
    "index_universe",
    "partisanship",
    "resolve_climate",
    "score_corpus",
    "year_bin",
]
