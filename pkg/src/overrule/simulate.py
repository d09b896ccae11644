"""Synthetic pools with planted gold answers, for property tests and sweeps.

Instances are drawn from independent per-question RNG streams derived from
(rng_seed, question index), so generation is reproducible and order-free
under parallel execution. Fidelity knobs control where auxiliary evidence
lands: on the gold basin, on the strongest wrong basin, or off-pair.

Answer strings are opaque pre-normalized tokens; the messy-text paths of
the normalizer are exercised by their own fixtures instead.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .basin import Candidate, Source, build_basins
from .metrics import CorrectionReport, GoldLabel, score_run
from .normalize import NormalizedAnswer, TaskFormat
from .pipeline import decide_question
from .delta import PolicyConfig
from .residual import ResidualConfig, ResidualInput, ResidualKey


class Planted(Enum):
    CORRECT_MAJORITY = "correct_majority"
    WRONG_MAJORITY = "wrong_majority"
    GOLD_ABSENT = "gold_absent"


DEFAULT_BASIN_DISTRIBUTION: Mapping[int, float] = {1: 0.45, 2: 0.35, 3: 0.15, 4: 0.05}
DEFAULT_FIDELITIES: Mapping[Source, float] = {
    Source.FRAMED: 0.7,
    Source.GUIDED: 0.7,
    Source.PANEL_ORIGINAL: 0.7,
    Source.PANEL_SWAPPED: 0.7,
}


@dataclass(frozen=True)
class SimConfig:
    n_questions: int
    k_raw: int = 24
    basin_count_distribution: Mapping[int, float] = field(
        default_factory=lambda: dict(DEFAULT_BASIN_DISTRIBUTION)
    )
    wrong_majority_rate: float = 0.1
    gold_absent_rate: float = 0.0
    source_fidelities: Mapping[Source, float] = field(
        default_factory=lambda: dict(DEFAULT_FIDELITIES)
    )
    off_pair_rate: float = 0.05
    framed_trials: int = 24
    panel_trials: int = 12
    guided_trials: int = 4
    temperature: float = 0.8
    include_greedy: bool = False
    rng_seed: int = 0


@dataclass(frozen=True)
class SimInstance:
    question_id: str
    pool: list[Candidate]  # raw candidates plus optional greedy anchor
    evidence: list[Candidate]  # framed / panel / guided outputs
    gold: GoldLabel
    planted: Planted


class InfeasibleSimConfig(ValueError):
    pass


def _validate(cfg: SimConfig) -> None:
    if cfg.n_questions < 0:
        raise InfeasibleSimConfig("n_questions must be non-negative")
    if cfg.k_raw < 1:
        raise InfeasibleSimConfig("k_raw must be at least 1")
    for name, p in (
        ("wrong_majority_rate", cfg.wrong_majority_rate),
        ("gold_absent_rate", cfg.gold_absent_rate),
        ("off_pair_rate", cfg.off_pair_rate),
    ):
        if not 0.0 <= p <= 1.0:
            raise InfeasibleSimConfig(f"{name} must lie in [0, 1]")
    if cfg.wrong_majority_rate + cfg.gold_absent_rate > 1.0:
        raise InfeasibleSimConfig("wrong_majority_rate + gold_absent_rate exceeds 1")
    for src, p in cfg.source_fidelities.items():
        if not 0.0 <= p <= 1.0:
            raise InfeasibleSimConfig(f"fidelity for {src.value} must lie in [0, 1]")
    if min(cfg.framed_trials, cfg.panel_trials, cfg.guided_trials) < 0:
        raise InfeasibleSimConfig("trial counts must be non-negative")
    dist = cfg.basin_count_distribution
    if not dist or any(m < 1 for m in dist) or any(w < 0 for w in dist.values()):
        raise InfeasibleSimConfig("basin_count_distribution must weight m >= 1")
    feasible = {m: w for m, w in dist.items() if m <= cfg.k_raw and w > 0}
    if not feasible:
        raise InfeasibleSimConfig("no feasible basin count fits inside k_raw")
    if cfg.wrong_majority_rate > 0 and all(m < 2 for m in feasible):
        raise InfeasibleSimConfig(
            "wrong-majority instances need m >= 2 but the basin count "
            "distribution only supports m = 1"
        )


def _draw_m(rng: random.Random, cfg: SimConfig, at_least: int) -> int:
    support = [
        (m, w)
        for m, w in sorted(cfg.basin_count_distribution.items())
        if at_least <= m <= cfg.k_raw and w > 0
    ]
    values, weights = zip(*support)
    return rng.choices(values, weights=weights)[0]


def _compose_sizes(rng: random.Random, k: int, m: int) -> list[int]:
    sizes = [1] * m
    # bias extra votes toward low basin indices to mimic a dominant basin
    weights = [m - j for j in range(m)]
    for _ in range(k - m):
        sizes[rng.choices(range(m), weights=weights)[0]] += 1
    sizes.sort(reverse=True)
    return sizes


def _raw_candidate(index: int, answer: str, temperature: float, seed: int) -> Candidate:
    return Candidate(
        index=index,
        text=f"synthetic solution; final answer token {answer}",
        answer=NormalizedAnswer(answer, True),
        source=Source.RAW,
        temperature=temperature,
        seed=seed,
    )


def _aux_answer(
    rng: random.Random,
    cfg: SimConfig,
    src: Source,
    basin_answers: Sequence[str],
    gold_answer: str,
    off_token: str,
) -> str:
    if rng.random() < cfg.off_pair_rate:
        return off_token
    fidelity = cfg.source_fidelities.get(src, 0.0)
    if rng.random() < fidelity:
        return gold_answer  # may match no basin when gold is absent from the pool
    for answer in basin_answers:
        if answer != gold_answer:
            return answer
    return off_token


def _build_instance(cfg: SimConfig, i: int) -> SimInstance:
    rng = random.Random(f"{cfg.rng_seed}:{i}")
    qid = f"sim-{i:06d}"

    u = rng.random()
    if u < cfg.wrong_majority_rate:
        planted = Planted.WRONG_MAJORITY
    elif u < cfg.wrong_majority_rate + cfg.gold_absent_rate:
        planted = Planted.GOLD_ABSENT
    else:
        planted = Planted.CORRECT_MAJORITY

    m = _draw_m(rng, cfg, at_least=2 if planted is Planted.WRONG_MAJORITY else 1)
    sizes = _compose_sizes(rng, cfg.k_raw, m)
    basin_answers = [f"ans_{i:05d}_{j}" for j in range(m)]

    if planted is Planted.WRONG_MAJORITY:
        gold_answer = basin_answers[rng.randint(1, m - 1)]
    elif planted is Planted.GOLD_ABSENT:
        gold_answer = f"ans_{i:05d}_x"
    else:
        gold_answer = basin_answers[0]

    # One candidate per basin first, in basin order, so equal-size ties rank
    # by basin index; the remaining votes are shuffled behind them.
    assignment = list(range(m))
    tail = [j for j in range(m) for _ in range(sizes[j] - 1)]
    rng.shuffle(tail)
    assignment.extend(tail)
    pool = [
        _raw_candidate(idx, basin_answers[j], cfg.temperature, rng.getrandbits(31))
        for idx, j in enumerate(assignment)
    ]
    if cfg.include_greedy:
        pool.append(
            Candidate(
                index=0,
                text="synthetic greedy anchor",
                answer=NormalizedAnswer(basin_answers[0], True),
                source=Source.GREEDY,
                temperature=0.0,
                seed=rng.getrandbits(31),
            )
        )

    evidence: list[Candidate] = []

    def emit(src: Source, index: int, trial_tag: str) -> None:
        answer = _aux_answer(
            rng, cfg, src, basin_answers, gold_answer, f"off_{i:05d}_{trial_tag}"
        )
        evidence.append(
            Candidate(
                index=index,
                text=f"synthetic {src.value} output; token {answer}",
                answer=NormalizedAnswer(answer, True),
                source=src,
                temperature=cfg.temperature,
                seed=rng.getrandbits(31),
            )
        )

    for t in range(cfg.framed_trials):
        emit(Source.FRAMED, t, f"f{t}")
    for t in range(cfg.panel_trials):
        src = Source.PANEL_ORIGINAL if t % 2 == 0 else Source.PANEL_SWAPPED
        emit(src, t // 2, f"p{t}")
    for t in range(cfg.guided_trials):
        emit(Source.GUIDED, t, f"g{t}")

    return SimInstance(
        question_id=qid,
        pool=pool,
        evidence=evidence,
        gold=GoldLabel(question_id=qid, answer=gold_answer),
        planted=planted,
    )


def generate(cfg: SimConfig) -> list[SimInstance]:
    """Draw a deterministic population of planted instances."""
    _validate(cfg)
    return [_build_instance(cfg, i) for i in range(cfg.n_questions)]


def sweep_policy(
    instances: Sequence[SimInstance],
    cfg: PolicyConfig,
    rcfg: ResidualConfig | None = None,
    residuals: Mapping[ResidualKey, ResidualInput] | None = None,
    fmt: TaskFormat = TaskFormat.NUMERIC,
    oracle_ks: Sequence[int] = (2, 3, 5),
) -> CorrectionReport:
    """Replay the full arbitration loop over simulated instances."""
    predictions: dict[str, str] = {}
    baselines: dict[str, str] = {}
    basin_sets = {}
    gold = {}
    for inst in instances:
        basins = build_basins(inst.pool, fmt, inst.question_id)
        outcome = decide_question(basins, inst.evidence, fmt, cfg, rcfg, residuals)
        predictions[inst.question_id] = outcome.prediction
        baselines[inst.question_id] = basins.consensus_answer
        basin_sets[inst.question_id] = basins
        gold[inst.question_id] = inst.gold
    return score_run(predictions, baselines, basin_sets, gold, fmt, oracle_ks)
