"""Post-consensus arbitration over pools of sampled model answers.

The pipeline clusters sampled solutions into answer basins, accumulates
same-model auxiliary evidence per basin, overrides the majority answer only
when the accumulated log evidence favors the leading challenger, and
reports count-level correction metrics.
"""

from .basin import (
    Basin,
    BasinSet,
    Candidate,
    EmptyBasinSetError,
    NoChallengerError,
    Source,
    build_basins,
    disagreement_slice,
)
from .delta import (
    DeltaDecision,
    PolicyConfig,
    SourceSet,
    delta_score,
    pooled_weights,
    select,
)
from .evidence import (
    EvidenceLedger,
    ReliabilitySet,
    SourceTally,
    assign_evidence,
    panel_reliability,
    reliability_top2,
)
from .metrics import (
    CorrectionReport,
    GoldLabel,
    OracleStat,
    net_gain_pp,
    oracle_at_k,
    oracle_rate_from_counts,
    score_run,
    wrong_majority,
)
from .normalize import (
    NormalizedAnswer,
    TaskFormat,
    answers_equivalent,
    extract_answer,
)
from .residual import (
    ResidualConfig,
    ResidualInput,
    delta_enc,
    heldout_target,
    residual_loss,
)
from .simulate import Planted, SimConfig, SimInstance, generate, sweep_policy

__version__ = "0.1.0"

__all__ = [
    "Basin",
    "BasinSet",
    "Candidate",
    "CorrectionReport",
    "DeltaDecision",
    "EmptyBasinSetError",
    "EvidenceLedger",
    "GoldLabel",
    "NoChallengerError",
    "NormalizedAnswer",
    "OracleStat",
    "Planted",
    "PolicyConfig",
    "ReliabilitySet",
    "ResidualConfig",
    "ResidualInput",
    "SimConfig",
    "SimInstance",
    "Source",
    "SourceSet",
    "SourceTally",
    "TaskFormat",
    "answers_equivalent",
    "assign_evidence",
    "build_basins",
    "delta_enc",
    "delta_score",
    "disagreement_slice",
    "extract_answer",
    "generate",
    "heldout_target",
    "net_gain_pp",
    "oracle_at_k",
    "oracle_rate_from_counts",
    "panel_reliability",
    "pooled_weights",
    "reliability_top2",
    "residual_loss",
    "score_run",
    "select",
    "sweep_policy",
    "wrong_majority",
]
