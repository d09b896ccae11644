"""Per-source, per-basin support counts and label-free reliability factors.

Every auxiliary generation is an attempt; only attempts whose parsed answer
lands in an observed basin add support to it. Reliability shrinks a source's
influence when its outputs scatter off the compared pair of basins, or (for
panel trials) when swapping the displayed frame order shifts the top-pair
distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .basin import EVIDENCE_SOURCES, BasinSet, Candidate, NoChallengerError, Source
from .normalize import TaskFormat, equivalence_key


@dataclass(frozen=True)
class SourceTally:
    counts: Mapping[str, int] = field(default_factory=dict)  # basin answer -> support
    attempted: int = 0

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.counts.values()) or self.attempted < 0:
            raise ValueError("tally counts must be non-negative")
        if sum(self.counts.values()) > self.attempted:
            raise ValueError("assigned support exceeds attempted outputs")


@dataclass(frozen=True)
class EvidenceLedger:
    question_id: str
    tallies: Mapping[Source, SourceTally]
    alpha: float = 1.0  # fixed Laplace pseudo-count

    def count(self, source: Source, answer: str) -> int:
        tally = self.tallies.get(source)
        return tally.counts.get(answer, 0) if tally else 0

    def attempted(self, source: Source) -> int:
        tally = self.tallies.get(source)
        return tally.attempted if tally else 0

    def pair_counts(self, source: Source, basins: BasinSet, rank: int) -> tuple[int, int]:
        """(dominant, rank-r challenger) support for one source."""
        return (
            self.count(source, basins.answer_at(1)),
            self.count(source, basins.answer_at(rank)),
        )

    def panel_counts(self, basins: BasinSet, rank: int) -> tuple[int, int]:
        """Order-summed panel support (p_1, p_r)."""
        a1, ar = basins.answer_at(1), basins.answer_at(rank)
        p1 = self.count(Source.PANEL_ORIGINAL, a1) + self.count(Source.PANEL_SWAPPED, a1)
        pr = self.count(Source.PANEL_ORIGINAL, ar) + self.count(Source.PANEL_SWAPPED, ar)
        return p1, pr


@dataclass(frozen=True)
class ReliabilitySet:
    r_f: float
    r_g: float
    rho_p: float


def assign_evidence(
    outputs: Iterable[Candidate],
    basins: BasinSet,
    fmt: TaskFormat,
    alpha: float = 1.0,
) -> EvidenceLedger:
    """Tally auxiliary outputs against the observed basins.

    Every framed/guided/panel output increments its source's attempted
    count. Outputs whose answer is equivalent to an observed basin answer
    additionally increment that basin's support. Invalid or off-basin
    outputs therefore dilute the source's reliability without voting.

    Raw support is seeded from the basins themselves; raw- or greedy-source
    entries in `outputs` are ignored (their streams are accounted elsewhere).
    """
    key_to_answer = {
        equivalence_key(b.answer, fmt): b.answer for b in basins.basins
    }
    counts: dict[Source, dict[str, int]] = {src: {} for src in EVIDENCE_SOURCES}
    attempted: dict[Source, int] = {src: 0 for src in EVIDENCE_SOURCES}
    for out in outputs:
        if out.source not in counts:
            continue
        attempted[out.source] += 1
        if not out.answer.valid:
            continue
        hit = key_to_answer.get(equivalence_key(out.answer.canonical, fmt))
        if hit is not None:
            counts[out.source][hit] = counts[out.source].get(hit, 0) + 1
    tallies: dict[Source, SourceTally] = {
        Source.RAW: SourceTally(
            counts={b.answer: b.size for b in basins.basins},
            attempted=basins.raw_attempted,
        )
    }
    for src in EVIDENCE_SOURCES:
        tallies[src] = SourceTally(counts=counts[src], attempted=attempted[src])
    return EvidenceLedger(question_id=basins.question_id, tallies=tallies, alpha=alpha)


def pair_reliability(
    ledger: EvidenceLedger, basins: BasinSet, source: Source, rank: int = 2
) -> float:
    """Top-pair attempted mass of one source: (c_1 + c_r) / N_att, 0 when idle."""
    attempted = ledger.attempted(source)
    if attempted == 0:
        return 0.0
    c1, cr = ledger.pair_counts(source, basins, rank)
    return (c1 + cr) / attempted


def panel_reliability(ledger: EvidenceLedger, basins: BasinSet, rank: int = 2) -> float:
    """Panel reliability: top-pair mass times order symmetry.

    The mass term pools both display orders; the symmetry term compares the
    smoothed challenger share between the original and swapped orders and
    discounts order-sensitive panels. Returns 0 when no panel output was
    attempted in either order.
    """
    n_plus = ledger.attempted(Source.PANEL_ORIGINAL)
    n_minus = ledger.attempted(Source.PANEL_SWAPPED)
    if n_plus + n_minus == 0:
        return 0.0
    a1, ar = basins.answer_at(1), basins.answer_at(rank)
    p1_plus = ledger.count(Source.PANEL_ORIGINAL, a1)
    pr_plus = ledger.count(Source.PANEL_ORIGINAL, ar)
    p1_minus = ledger.count(Source.PANEL_SWAPPED, a1)
    pr_minus = ledger.count(Source.PANEL_SWAPPED, ar)
    mass = (p1_plus + pr_plus + p1_minus + pr_minus) / (n_plus + n_minus)
    a = ledger.alpha
    nu_plus = (pr_plus + a) / (p1_plus + pr_plus + 2 * a)
    nu_minus = (pr_minus + a) / (p1_minus + pr_minus + 2 * a)
    return mass * (1.0 - abs(nu_plus - nu_minus))


def reliability_top2(ledger: EvidenceLedger, basins: BasinSet) -> ReliabilitySet:
    """Reliability factors for the main top-2 policy."""
    if basins.m < 2:
        raise NoChallengerError(
            f"no challenger: question {basins.question_id!r} has a single basin"
        )
    return ReliabilitySet(
        r_f=pair_reliability(ledger, basins, Source.FRAMED, 2),
        r_g=pair_reliability(ledger, basins, Source.GUIDED, 2),
        rho_p=panel_reliability(ledger, basins, 2),
    )
