"""Per-question arbitration glue shared by the simulator and the CLI.

Wires the stages together for one question: build basins, tally evidence,
score the challenger, optionally add a residual, and emit the prediction.
Single-basin questions have nothing to arbitrate and pass straight through
to consensus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .basin import BasinSet, Candidate, Source, build_basins
from .delta import DeltaDecision, PolicyConfig, delta_score, select
from .evidence import EvidenceLedger, assign_evidence
from .normalize import TaskFormat
from .residual import ResidualConfig, ResidualInput, ResidualKey, delta_enc


@dataclass(frozen=True)
class QuestionDecision:
    basins: BasinSet
    ledger: EvidenceLedger
    decision: DeltaDecision | None  # None when no challenger exists
    prediction: str

    @property
    def override(self) -> bool:
        return self.decision.override if self.decision else False


def decide_question(
    basins: BasinSet,
    aux_outputs: Sequence[Candidate],
    fmt: TaskFormat,
    policy: PolicyConfig,
    residual_cfg: ResidualConfig | None = None,
    residuals: Mapping[ResidualKey, ResidualInput] | None = None,
) -> QuestionDecision:
    ledger = assign_evidence(aux_outputs, basins, fmt, alpha=policy.alpha)
    if basins.m < policy.challenger_rank:
        return QuestionDecision(basins, ledger, None, basins.consensus_answer)
    decision = delta_score(ledger, basins, policy)
    if residual_cfg is not None and residual_cfg.scale > 0 and residuals is not None:
        inp = residuals.get((basins.question_id, policy.challenger_rank))
        if inp is not None:
            decision = delta_enc(decision, inp, residual_cfg)
    return QuestionDecision(basins, ledger, decision, select(decision, basins))


def decide_pool(
    question_id: str,
    pool: Sequence[Candidate],
    fmt: TaskFormat,
    policy: PolicyConfig,
    residual_cfg: ResidualConfig | None = None,
    residuals: Mapping[ResidualKey, ResidualInput] | None = None,
) -> QuestionDecision:
    """decide_question over a mixed-source candidate list for one question."""
    basins = build_basins(pool, fmt, question_id)
    aux = [c for c in pool if c.source not in (Source.RAW, Source.GREEDY)]
    return decide_question(basins, aux, fmt, policy, residual_cfg, residuals)
