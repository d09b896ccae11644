"""Evaluation-time accounting for correction policies.

Gold labels enter only here, strictly after prediction. The central object
is the correction decomposition: overrides split into recovered
(wrong-to-right), degraded (right-to-wrong), and wrong-to-wrong moves, with
net = recovered - degraded. Oracle@k and the wrong-majority indicator are
same-pool diagnostics, not deployable selectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterator, Mapping, Sequence

from .basin import BasinSet
from .normalize import TaskFormat, strings_equivalent


@dataclass(frozen=True)
class GoldLabel:
    question_id: str
    answer: str  # canonical string


@dataclass(frozen=True)
class OracleStat:
    rate_pct: float
    extra_correct: int  # additional correct examples over the baseline


@dataclass(frozen=True)
class CorrectionReport:
    n: int
    baseline_correct: int
    final_correct: int
    overrides: int
    recovered: int
    degraded: int
    wrong_to_wrong: int  # overrides that replace one wrong answer with another
    net: int
    accuracy_baseline: float  # percent
    accuracy_final: float  # percent
    gain_pp: float
    oracle_at: Mapping[int, OracleStat]
    wm_count: int


class QuestionKeyMismatch(ValueError):
    """The prediction/baseline/basin/gold maps disagree on question ids."""


def gold_rank(basins: BasinSet, gold: GoldLabel, fmt: TaskFormat) -> int | None:
    """Rank of the basin holding the gold answer, or None if absent."""
    for rank, b in enumerate(basins.basins, start=1):
        if strings_equivalent(b.answer, gold.answer, fmt):
            return rank
    return None


def oracle_at_k(basins: BasinSet, gold: GoldLabel, k: int, fmt: TaskFormat) -> bool:
    """True iff the gold answer appears among the top-k ranked basins."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return any(
        strings_equivalent(b.answer, gold.answer, fmt) for b in basins.basins[:k]
    )


def wrong_majority(basins: BasinSet, gold: GoldLabel, fmt: TaskFormat) -> bool:
    """True iff consensus is wrong while a correct challenger basin exists."""
    if strings_equivalent(basins.consensus_answer, gold.answer, fmt):
        return False
    return any(
        strings_equivalent(b.answer, gold.answer, fmt) for b in basins.basins[1:]
    )


def _check_keys(maps: Mapping[str, Mapping[str, object]]) -> list[str]:
    key_sets = {name: set(m) for name, m in maps.items()}
    union: set[str] = set().union(*key_sets.values())
    problems = []
    for name, keys in key_sets.items():
        missing = sorted(union - keys)
        if missing:
            problems.append(f"{name} missing {', '.join(missing)}")
    if problems:
        raise QuestionKeyMismatch("; ".join(problems))
    return sorted(union)


def score_run(
    predictions: Mapping[str, str],
    baselines: Mapping[str, str],
    basins: Mapping[str, BasinSet],
    gold: Mapping[str, GoldLabel],
    fmt: TaskFormat,
    oracle_ks: Sequence[int] = (2, 3, 5),
) -> CorrectionReport:
    """Score one policy run against gold labels.

    All four maps must share the same question-id key set; a mismatch
    raises with the missing ids named. N counts every question — parse
    failures never shrink the denominator.
    """
    qids = _check_keys(
        {
            "predictions": predictions,
            "baselines": baselines,
            "basins": basins,
            "gold": gold,
        }
    )
    n = len(qids)
    if n == 0:
        raise ValueError("cannot score an empty run")

    baseline_correct = final_correct = 0
    overrides = recovered = degraded = wrong_to_wrong = wm_count = 0
    oracle_true = {k: 0 for k in oracle_ks}
    for qid in qids:
        g = gold[qid]
        base_right = strings_equivalent(baselines[qid], g.answer, fmt)
        pred_right = strings_equivalent(predictions[qid], g.answer, fmt)
        moved = not strings_equivalent(predictions[qid], baselines[qid], fmt)
        baseline_correct += base_right
        final_correct += pred_right
        if moved:
            overrides += 1
            if not base_right and pred_right:
                recovered += 1
            elif base_right and not pred_right:
                degraded += 1
            else:
                wrong_to_wrong += 1
        rank = gold_rank(basins[qid], g, fmt)
        for k in oracle_ks:
            oracle_true[k] += rank is not None and rank <= k
        wm_count += rank is not None and rank > 1

    net = recovered - degraded
    assert final_correct == baseline_correct + net
    return CorrectionReport(
        n=n,
        baseline_correct=baseline_correct,
        final_correct=final_correct,
        overrides=overrides,
        recovered=recovered,
        degraded=degraded,
        wrong_to_wrong=wrong_to_wrong,
        net=net,
        accuracy_baseline=100.0 * baseline_correct / n,
        accuracy_final=100.0 * final_correct / n,
        gain_pp=100.0 * net / n,
        oracle_at={
            k: OracleStat(
                rate_pct=100.0 * oracle_true[k] / n,
                extra_correct=oracle_true[k] - baseline_correct,
            )
            for k in oracle_ks
        },
        wm_count=wm_count,
    )


def example_outcomes(
    predictions: Mapping[str, str],
    baselines: Mapping[str, str],
    basins: Mapping[str, BasinSet],
    gold: Mapping[str, GoldLabel],
    fmt: TaskFormat,
) -> Iterator[dict[str, object]]:
    """Per-question outcome rows, sorted by question id."""
    qids = _check_keys(
        {
            "predictions": predictions,
            "baselines": baselines,
            "basins": basins,
            "gold": gold,
        }
    )
    for qid in qids:
        g = gold[qid]
        base_right = strings_equivalent(baselines[qid], g.answer, fmt)
        pred_right = strings_equivalent(predictions[qid], g.answer, fmt)
        moved = not strings_equivalent(predictions[qid], baselines[qid], fmt)
        rank = gold_rank(basins[qid], g, fmt)
        yield {
            "question_id": qid,
            "baseline_answer": baselines[qid],
            "predicted_answer": predictions[qid],
            "gold_answer": g.answer,
            "baseline_correct": base_right,
            "predicted_correct": pred_right,
            "override": moved,
            "recovered": moved and not base_right and pred_right,
            "degraded": moved and base_right and not pred_right,
            "m": basins[qid].m,
            "gold_rank": rank,
            "wrong_majority": rank is not None and rank > 1,
        }


def net_gain_pp(n: int, recovered: int, degraded: int) -> float:
    """Accuracy gain in percentage points implied by a correction count."""
    if n <= 0:
        raise ValueError("n must be positive")
    return 100.0 * (recovered - degraded) / n


def oracle_rate_from_counts(consensus_pct: float, n: int, extra_correct: int) -> float:
    """Oracle@k percentage implied by a baseline rate and an extra-correct count."""
    if n <= 0:
        raise ValueError("n must be positive")
    return consensus_pct + 100.0 * extra_correct / n


def round_half_up(value: float, places: int = 2) -> str:
    """Format a percentage the way the report tables print it."""
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))
