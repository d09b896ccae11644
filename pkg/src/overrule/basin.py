"""Answer-basin construction over a sampled candidate pool.

A basin is a cluster of sampled solutions sharing one final answer. Basins
are ranked by size, with deterministic tie-breaking by earliest member
index and then canonical answer string. The rank-1 basin's answer is the
raw-consensus prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .normalize import NormalizedAnswer, TaskFormat, equivalence_key


class Source(Enum):
    """Which generation stream produced a candidate.

    Streams never mix: only RAW candidates vote in consensus, GREEDY is a
    separately-reported anchor, and the rest are auxiliary evidence.
    """

    RAW = "raw"
    GREEDY = "greedy"
    FRAMED = "framed"
    PANEL_ORIGINAL = "panel_original"
    PANEL_SWAPPED = "panel_swapped"
    GUIDED = "guided"


EVIDENCE_SOURCES = (
    Source.FRAMED,
    Source.GUIDED,
    Source.PANEL_ORIGINAL,
    Source.PANEL_SWAPPED,
)

SOURCE_ORDER = {src: i for i, src in enumerate(Source)}


@dataclass(frozen=True)
class Candidate:
    index: int  # sample order within (pool, source)
    text: str
    answer: NormalizedAnswer
    source: Source
    temperature: float
    seed: int


class EmptyBasinSetError(ValueError):
    """No valid raw candidate exists, so no consensus can be formed."""


class NoChallengerError(ValueError):
    """Arbitration was requested but no challenger basin exists."""


@dataclass(frozen=True)
class Basin:
    answer: str  # canonical string of the earliest member
    members: tuple[int, ...]  # raw candidate indices, ascending
    size: int


@dataclass(frozen=True)
class BasinSet:
    question_id: str
    basins: tuple[Basin, ...]  # rank order: basins[0] is the dominant basin
    consensus_answer: str
    raw_attempted: int  # raw candidates including invalid ones, excluding greedy

    @property
    def m(self) -> int:
        """Number of observed basins."""
        return len(self.basins)

    @property
    def invalid_count(self) -> int:
        return self.raw_attempted - sum(b.size for b in self.basins)

    def answer_at(self, rank: int) -> str:
        if not 1 <= rank <= len(self.basins):
            raise NoChallengerError(f"no basin at rank {rank} (m={self.m})")
        return self.basins[rank - 1].answer

    def size_at(self, rank: int) -> int:
        if not 1 <= rank <= len(self.basins):
            raise NoChallengerError(f"no basin at rank {rank} (m={self.m})")
        return self.basins[rank - 1].size


def build_basins(
    pool: Sequence[Candidate], fmt: TaskFormat, question_id: str = ""
) -> BasinSet:
    """Group valid raw candidates into ranked answer basins.

    Invalid candidates cast no vote and join no basin, but stay in the
    attempted total. Greedy and auxiliary-source candidates are ignored
    here entirely.

    Raises EmptyBasinSetError when every raw candidate is invalid.
    """
    raw = sorted((c for c in pool if c.source is Source.RAW), key=lambda c: c.index)
    if len({c.index for c in raw}) != len(raw):
        raise ValueError(
            f"duplicate raw candidate indices in question {question_id!r}"
        )
    groups: dict[tuple[str, object], list[Candidate]] = {}
    for cand in raw:
        if not cand.answer.valid:
            continue
        groups.setdefault(equivalence_key(cand.answer.canonical, fmt), []).append(cand)
    if not groups:
        raise EmptyBasinSetError(
            f"empty basin set: question {question_id!r} has no valid raw candidate"
        )
    basins = [
        Basin(
            answer=members[0].answer.canonical,
            members=tuple(c.index for c in members),
            size=len(members),
        )
        for members in groups.values()
    ]
    basins.sort(key=lambda b: (-b.size, b.members[0], b.answer))
    return BasinSet(
        question_id=question_id,
        basins=tuple(basins),
        consensus_answer=basins[0].answer,
        raw_attempted=len(raw),
    )


def disagreement_slice(sets: Iterable[BasinSet]) -> list[str]:
    """Question ids whose pools split into two or more basins."""
    return [s.question_id for s in sets if s.m >= 2]
