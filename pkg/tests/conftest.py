from __future__ import annotations

import random

from overrule.basin import Basin, BasinSet, Candidate, Source
from overrule.evidence import EvidenceLedger, SourceTally
from overrule.normalize import NormalizedAnswer, TaskFormat


def make_candidate(
    index: int,
    answer: str,
    source: Source = Source.RAW,
    valid: bool = True,
    text: str | None = None,
    temperature: float = 0.8,
    seed: int | None = None,
) -> Candidate:
    return Candidate(
        index=index,
        text=text if text is not None else f"synthetic text ending in {answer}",
        answer=NormalizedAnswer(answer if valid else "", valid),
        source=source,
        temperature=temperature,
        seed=seed if seed is not None else 7_000 + index,
    )


def pool_from_answers(answers: list[str | None], source: Source = Source.RAW) -> list[Candidate]:
    """None entries become invalid candidates; order fixes the indices."""
    return [
        make_candidate(i, a or "", source=source, valid=a is not None)
        for i, a in enumerate(answers)
    ]


def make_basinset(
    sizes: list[int], question_id: str = "q", extra_attempted: int = 0
) -> BasinSet:
    """Direct BasinSet with synthetic answers b0, b1, ... in rank order."""
    basins = []
    next_index = 0
    for j, size in enumerate(sizes):
        members = tuple(range(next_index, next_index + size))
        next_index += max(size, 1)
        basins.append(Basin(answer=f"b{j}", members=members, size=size))
    return BasinSet(
        question_id=question_id,
        basins=tuple(basins),
        consensus_answer=basins[0].answer,
        raw_attempted=sum(sizes) + extra_attempted,
    )


def make_ledger(
    basins: BasinSet,
    framed: dict[str, int] | None = None,
    guided: dict[str, int] | None = None,
    panel_original: dict[str, int] | None = None,
    panel_swapped: dict[str, int] | None = None,
    attempted: dict[Source, int] | None = None,
    alpha: float = 1.0,
) -> EvidenceLedger:
    """Ledger built straight from counts; attempted defaults to the count sums."""
    per_source = {
        Source.FRAMED: framed or {},
        Source.GUIDED: guided or {},
        Source.PANEL_ORIGINAL: panel_original or {},
        Source.PANEL_SWAPPED: panel_swapped or {},
    }
    attempted = attempted or {}
    tallies = {
        Source.RAW: SourceTally(
            counts={b.answer: b.size for b in basins.basins},
            attempted=basins.raw_attempted,
        )
    }
    for src, counts in per_source.items():
        tallies[src] = SourceTally(
            counts=dict(counts),
            attempted=attempted.get(src, sum(counts.values())),
        )
    return EvidenceLedger(question_id=basins.question_id, tallies=tallies, alpha=alpha)


def random_case(rng: random.Random) -> tuple[BasinSet, EvidenceLedger]:
    """Random basins plus a consistent random evidence ledger, for fuzz loops."""
    m = rng.randint(2, 5)
    sizes = sorted((rng.randint(1, 40) for _ in range(m)), reverse=True)
    basins = make_basinset(sizes, question_id=f"fuzz-{rng.getrandbits(24):06x}")
    answers = [b.answer for b in basins.basins]

    def counts() -> dict[str, int]:
        return {a: rng.randint(0, 30) for a in answers if rng.random() < 0.8}

    per = {src: counts() for src in (
        Source.FRAMED, Source.GUIDED, Source.PANEL_ORIGINAL, Source.PANEL_SWAPPED,
    )}
    attempted = {
        src: sum(c.values()) + rng.randint(0, 10) for src, c in per.items()
    }
    ledger = make_ledger(
        basins,
        framed=per[Source.FRAMED],
        guided=per[Source.GUIDED],
        panel_original=per[Source.PANEL_ORIGINAL],
        panel_swapped=per[Source.PANEL_SWAPPED],
        attempted=attempted,
    )
    return basins, ledger


WORKED_RAW = ["72"] * 18 + ["31"] * 4 + ["7", "19", "58"]


def worked_example() -> tuple[BasinSet, EvidenceLedger]:
    """The wrong-majority fixture: b=18/4, f=8/13, g=0/4, panel 2/9.

    The panel order split (original 1+5, swapped 1+4 with one invalid) is a
    derived choice consistent with the 9-vs-2 totals and 12 attempted trials;
    only the totals are pinned by the fixture's source material.
    """
    from overrule.basin import build_basins

    pool = pool_from_answers(WORKED_RAW)
    basins = build_basins(pool, TaskFormat.NUMERIC, "wm-0001")
    ledger = make_ledger(
        basins,
        framed={"72": 8, "31": 13},
        guided={"31": 4},
        panel_original={"72": 1, "31": 5},
        panel_swapped={"72": 1, "31": 4},
        attempted={
            Source.FRAMED: 24,
            Source.GUIDED: 4,
            Source.PANEL_ORIGINAL: 6,
            Source.PANEL_SWAPPED: 6,
        },
    )
    return basins, ledger
