"""The log-linear override score and sign decision.

Consensus is the prior: the challenger basin starts behind by the raw-vote
log ratio and wins only when reliability-weighted auxiliary evidence more
than compensates. The score is exactly the log ratio of pooled per-basin
support products, which gives an independent route to the same number for
verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .basin import BasinSet, NoChallengerError, Source
from .evidence import (
    EvidenceLedger,
    ReliabilitySet,
    pair_reliability,
    panel_reliability,
)


class SourceSet(Enum):
    FRAMED_GUIDED = "framed_guided"  # main policy
    PANEL_GUIDED = "panel_guided"
    ALL_SOURCES = "all_sources"
    RAW_ONLY = "raw_only"


_USES_FRAMED = {SourceSet.FRAMED_GUIDED, SourceSet.ALL_SOURCES}
_USES_GUIDED = {SourceSet.FRAMED_GUIDED, SourceSet.PANEL_GUIDED, SourceSet.ALL_SOURCES}
_USES_PANEL = {SourceSet.PANEL_GUIDED, SourceSet.ALL_SOURCES}


@dataclass(frozen=True)
class PolicyConfig:
    source_set: SourceSet = SourceSet.FRAMED_GUIDED
    alpha: float = 1.0
    challenger_rank: int = 2
    # True replaces the computed reliability factors with 1.0, the
    # illustrative-calculation convention.
    unit_reliability: bool = False

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.challenger_rank < 2:
            raise ValueError("challenger_rank must be at least 2")


@dataclass(frozen=True)
class DeltaDecision:
    question_id: str
    raw_term: float
    framed_term: float
    guided_term: float
    panel_term: float  # 0 outside panel ablations
    residual_term: float  # 0 until a residual is applied
    score: float
    challenger_rank: int
    selected_rank: int  # challenger_rank on override, else 1
    override: bool
    reliabilities: ReliabilitySet


def _resolve_reliabilities(
    ledger: EvidenceLedger, basins: BasinSet, cfg: PolicyConfig
) -> ReliabilitySet:
    if cfg.unit_reliability:
        return ReliabilitySet(r_f=1.0, r_g=1.0, rho_p=1.0)
    rank = cfg.challenger_rank
    return ReliabilitySet(
        r_f=pair_reliability(ledger, basins, Source.FRAMED, rank),
        r_g=pair_reliability(ledger, basins, Source.GUIDED, rank),
        rho_p=panel_reliability(ledger, basins, rank),
    )


def _require_challenger(basins: BasinSet, cfg: PolicyConfig) -> None:
    if basins.m < cfg.challenger_rank:
        raise NoChallengerError(
            f"no challenger: question {basins.question_id!r} has m={basins.m}, "
            f"rank {cfg.challenger_rank} requested"
        )


def delta_score(
    ledger: EvidenceLedger, basins: BasinSet, cfg: PolicyConfig
) -> DeltaDecision:
    """Score the rank-r challenger against the dominant basin.

    The raw term is always present; framed, guided, and panel terms are
    added according to the configured source set, each scaled by its
    reliability factor. Natural log throughout; the challenger is selected
    iff the total is strictly positive.
    """
    _require_challenger(basins, cfg)
    rank = cfg.challenger_rank
    a = cfg.alpha
    rel = _resolve_reliabilities(ledger, basins, cfg)

    b1, br = basins.size_at(1), basins.size_at(rank)
    raw_term = math.log((br + a) / (b1 + a))

    framed_term = guided_term = panel_term = 0.0
    if cfg.source_set in _USES_FRAMED:
        f1, fr = ledger.pair_counts(Source.FRAMED, basins, rank)
        framed_term = rel.r_f * math.log((fr + a) / (f1 + a))
    if cfg.source_set in _USES_GUIDED:
        g1, gr = ledger.pair_counts(Source.GUIDED, basins, rank)
        guided_term = rel.r_g * math.log((gr + a) / (g1 + a))
    if cfg.source_set in _USES_PANEL:
        p1, pr = ledger.panel_counts(basins, rank)
        panel_term = rel.rho_p * math.log((pr + a) / (p1 + a))

    score = raw_term + framed_term + guided_term + panel_term
    override = score > 0.0
    return DeltaDecision(
        question_id=basins.question_id,
        raw_term=raw_term,
        framed_term=framed_term,
        guided_term=guided_term,
        panel_term=panel_term,
        residual_term=0.0,
        score=score,
        challenger_rank=rank,
        selected_rank=rank if override else 1,
        override=override,
        reliabilities=rel,
    )


def pooled_weights(
    ledger: EvidenceLedger, basins: BasinSet, cfg: PolicyConfig
) -> tuple[float, float]:
    """Unnormalized pooled support (dominant, challenger) as plain products.

    Each basin's weight multiplies its smoothed per-source counts raised to
    the source reliabilities. The log ratio of the two weights equals the
    additive score, so this product form serves as an independent oracle
    for the score computation.
    """
    _require_challenger(basins, cfg)
    rank = cfg.challenger_rank
    a = cfg.alpha
    rel = _resolve_reliabilities(ledger, basins, cfg)

    weights = []
    for r in (1, rank):
        w = basins.size_at(r) + a
        if cfg.source_set in _USES_FRAMED:
            w *= (ledger.count(Source.FRAMED, basins.answer_at(r)) + a) ** rel.r_f
        if cfg.source_set in _USES_GUIDED:
            w *= (ledger.count(Source.GUIDED, basins.answer_at(r)) + a) ** rel.r_g
        if cfg.source_set in _USES_PANEL:
            p1, pr = ledger.panel_counts(basins, rank)
            w *= ((p1 if r == 1 else pr) + a) ** rel.rho_p
        weights.append(w)
    return weights[0], weights[1]


def select(decision: DeltaDecision, basins: BasinSet) -> str:
    """Answer chosen by the sign rule: challenger iff score > 0, else consensus."""
    return basins.answer_at(decision.selected_rank)


def with_residual_term(decision: DeltaDecision, residual_term: float) -> DeltaDecision:
    """Decision with an additive residual folded into the score and sign."""
    if residual_term == 0.0:
        return decision
    score = decision.score + residual_term
    override = score > 0.0
    return replace(
        decision,
        residual_term=residual_term,
        score=score,
        override=override,
        selected_rank=decision.challenger_rank if override else 1,
    )
