"""Networked evidence collection against an OpenAI-compatible endpoint.

Drives the prompt families (raw solves, framed solves, order-alternating
panel trials, guided re-solves) with bounded parallelism. Every planned
generation yields exactly one candidate: transport failures and junk
completions become invalid candidates so attempted denominators always
equal planned trial counts. Candidates are post-sorted by (source, trial)
so concurrent arrival order never changes a downstream number.
"""

from __future__ import annotations

import hashlib
import os
import string
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import httpx

from .basin import (
    SOURCE_ORDER,
    BasinSet,
    Candidate,
    EmptyBasinSetError,
    Source,
    build_basins,
)
from .normalize import INVALID_ANSWER, TaskFormat, extract_answer

API_KEY_ENV = "OVERRULE_API_KEY"
_FALLBACK_KEY_ENV = "OPENAI_API_KEY"

ANSWER_INSTRUCTIONS = {
    TaskFormat.NUMERIC: "End with a final line of the form: #### <number>",
    TaskFormat.MULTIPLE_CHOICE: (
        "End with a final line of the form: Answer: (X) where X is one of A, B, C, D."
    ),
    TaskFormat.BOXED: "Put the final answer in \\boxed{...} on the last line.",
}

TEMPLATE_NAMES = ("raw", "framed", "panel", "guided", "frame_extract")


class EndpointAuthError(RuntimeError):
    """The endpoint rejected our credentials; retrying cannot help."""


@dataclass(frozen=True)
class Question:
    question_id: str
    text: str


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key: str | None = None  # falls back to OVERRULE_API_KEY / OPENAI_API_KEY
    timeout: float = 60.0
    max_parallel: int = 4
    retry_budget: int = 2

    def __post_init__(self) -> None:
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be at least 1")
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be non-negative")

    def resolved_api_key(self) -> str | None:
        return (
            self.api_key
            or os.environ.get(API_KEY_ENV)
            or os.environ.get(_FALLBACK_KEY_ENV)
        )


@dataclass(frozen=True)
class PromptPlan:
    raw_solves: int = 24
    framed_solves: int = 24
    panel_trials: int = 12  # alternating original / swapped frame order
    guided_trials: int = 4  # alternating which basin's frame is the hypothesis
    greedy_solve: bool = False
    temperature: float = 0.8
    max_tokens: int = 1024
    template_dir: Path | None = None  # defaults to the packaged templates


def load_template(name: str, template_dir: Path | None = None) -> string.Template:
    if name not in TEMPLATE_NAMES:
        raise ValueError(f"unknown template {name!r}")
    if template_dir is not None:
        text = (Path(template_dir) / f"{name}.txt").read_text(encoding="utf-8")
    else:
        text = (
            resources.files("overrule").joinpath(f"templates/{name}.txt")
            .read_text(encoding="utf-8")
        )
    return string.Template(text)


def _derive_seed(question_id: str, source: str, trial: int) -> int:
    digest = hashlib.sha256(f"{question_id}:{source}:{trial}".encode()).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


@dataclass(frozen=True)
class _Task:
    question_id: str
    source: Source
    trial: int  # index within the source stream
    prompt: str
    temperature: float
    seed: int
    transcript_label: str | None = None  # overrides source.value in the transcript

    @property
    def label(self) -> str:
        return self.transcript_label or self.source.value


class EndpointClient:
    """Thin chat-completions client with per-request retries.

    One generation per request. A transport instance may be injected for
    tests; real usage builds an httpx client against the configured base
    URL.
    """

    def __init__(self, cfg: EndpointConfig, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        headers = {"Content-Type": "application/json"}
        key = cfg.resolved_api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            base_url=cfg.base_url.rstrip("/"),
            headers=headers,
            timeout=cfg.timeout,
            transport=transport,
        )
        self._lock = threading.Lock()
        self.transcript: list[dict[str, Any]] = []

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "EndpointClient":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def complete(self, task: _Task, max_tokens: int) -> tuple[str | None, str | None]:
        """Run one generation; returns (text, error). Never raises on transport
        failures within budget — the caller records invalid candidates."""
        payload = {
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": task.prompt}],
            "temperature": task.temperature,
            "max_tokens": max_tokens,
            "seed": task.seed,
        }
        last_error = "no attempt made"
        response_body: dict[str, Any] | None = None
        text: str | None = None
        for _ in range(self.cfg.retry_budget + 1):
            try:
                resp = self._client.post("/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last_error = f"transport: {exc}"
                continue
            if resp.status_code in (401, 403):
                raise EndpointAuthError(
                    f"endpoint rejected credentials (HTTP {resp.status_code})"
                )
            if resp.status_code != 200:
                last_error = f"http {resp.status_code}"
                continue
            try:
                response_body = resp.json()
                text = response_body["choices"][0]["message"]["content"]
                last_error = ""
                break
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                last_error = f"bad response body: {exc}"
                response_body = None
                continue
        with self._lock:
            self.transcript.append(
                {
                    "question_id": task.question_id,
                    "source": task.label,
                    "trial": task.trial,
                    "request": payload,
                    "response": response_body,
                    "error": last_error or None,
                }
            )
        return text, (last_error or None)


def _run_tasks(
    client: EndpointClient, tasks: Sequence[_Task], fmt: TaskFormat, max_tokens: int
) -> dict[str, list[Candidate]]:
    def run(task: _Task) -> tuple[str, Candidate]:
        text, _error = client.complete(task, max_tokens)
        answer = extract_answer(text, fmt) if text is not None else INVALID_ANSWER
        return task.question_id, Candidate(
            index=task.trial,
            text=text or "",
            answer=answer,
            source=task.source,
            temperature=task.temperature,
            seed=task.seed,
        )

    out: dict[str, list[Candidate]] = {}
    with ThreadPoolExecutor(max_workers=client.cfg.max_parallel) as pool:
        for qid, cand in pool.map(run, tasks):
            out.setdefault(qid, []).append(cand)
    for cands in out.values():
        cands.sort(key=lambda c: (SOURCE_ORDER[c.source], c.index))
    return out


def _solve_tasks(
    questions: Iterable[Question], fmt: TaskFormat, plan: PromptPlan
) -> list[_Task]:
    raw_tpl = load_template("raw", plan.template_dir)
    instruction = ANSWER_INSTRUCTIONS[fmt]
    tasks = []
    for q in questions:
        prompt = raw_tpl.substitute(question=q.text, answer_instruction=instruction)
        for t in range(plan.raw_solves):
            tasks.append(
                _Task(
                    q.question_id,
                    Source.RAW,
                    t,
                    prompt,
                    plan.temperature,
                    _derive_seed(q.question_id, "raw", t),
                )
            )
        if plan.greedy_solve:
            tasks.append(
                _Task(
                    q.question_id,
                    Source.GREEDY,
                    0,
                    prompt,
                    0.0,
                    _derive_seed(q.question_id, "greedy", 0),
                )
            )
    return tasks


def collect_raw_pool(
    questions: Sequence[Question],
    fmt: TaskFormat,
    cfg: EndpointConfig,
    plan: PromptPlan,
    client: EndpointClient | None = None,
) -> dict[str, list[Candidate]]:
    """Sample the raw pool (and optional greedy anchor) for each question."""
    own = client is None
    client = client or EndpointClient(cfg)
    try:
        pools = _run_tasks(client, _solve_tasks(questions, fmt, plan), fmt, plan.max_tokens)
    finally:
        if own:
            client.close()
    return {q.question_id: pools.get(q.question_id, []) for q in questions}


def describe_basins(
    basins: BasinSet,
    cfg: EndpointConfig,
    question_text: str,
    plan: PromptPlan,
    client: EndpointClient | None = None,
) -> dict[int, str]:
    """One-sentence frames for the top-2 basins, keyed by rank.

    A failed or empty generation yields an empty frame; callers skip the
    panel/guided trials for that question, leaving those reliabilities 0.
    """
    if basins.m < 2:
        raise ValueError(
            f"no challenger: question {basins.question_id!r} needs no frames"
        )
    tpl = load_template("frame_extract", plan.template_dir)
    own = client is None
    client = client or EndpointClient(cfg)
    frames: dict[int, str] = {}
    try:
        for rank in (1, 2):
            task = _Task(
                basins.question_id,
                Source.PANEL_ORIGINAL,  # unused: frame tasks build no candidate
                rank - 1,
                tpl.substitute(question=question_text, answer=basins.answer_at(rank)),
                plan.temperature,
                _derive_seed(basins.question_id, "frame", rank),
                transcript_label="frame_extract",
            )
            text, _error = client.complete(task, plan.max_tokens)
            frames[rank] = " ".join(text.split()) if text else ""
    finally:
        if own:
            client.close()
    return frames


def collect_evidence(
    questions: Sequence[Question],
    basin_sets: dict[str, BasinSet],
    frames: dict[str, dict[int, str]],
    fmt: TaskFormat,
    cfg: EndpointConfig,
    plan: PromptPlan,
    client: EndpointClient | None = None,
) -> dict[str, list[Candidate]]:
    """Framed, panel, and guided evidence for questions with a challenger.

    Framed solves run for every listed question; panel and guided trials
    need both frames and are skipped when either frame is empty.
    """
    framed_tpl = load_template("framed", plan.template_dir)
    panel_tpl = load_template("panel", plan.template_dir)
    guided_tpl = load_template("guided", plan.template_dir)
    instruction = ANSWER_INSTRUCTIONS[fmt]

    tasks: list[_Task] = []
    for q in questions:
        framed_prompt = framed_tpl.substitute(
            question=q.text, answer_instruction=instruction
        )
        for t in range(plan.framed_solves):
            tasks.append(
                _Task(
                    q.question_id,
                    Source.FRAMED,
                    t,
                    framed_prompt,
                    plan.temperature,
                    _derive_seed(q.question_id, "framed", t),
                )
            )
        pair = frames.get(q.question_id, {})
        frame_1, frame_2 = pair.get(1, ""), pair.get(2, "")
        if not (frame_1 and frame_2):
            continue
        for t in range(plan.panel_trials):
            swapped = t % 2 == 1
            prompt = panel_tpl.substitute(
                question=q.text,
                frame_1=frame_2 if swapped else frame_1,
                frame_2=frame_1 if swapped else frame_2,
                answer_instruction=instruction,
            )
            source = Source.PANEL_SWAPPED if swapped else Source.PANEL_ORIGINAL
            tasks.append(
                _Task(
                    q.question_id,
                    source,
                    t // 2,
                    prompt,
                    plan.temperature,
                    _derive_seed(q.question_id, source.value, t // 2),
                )
            )
        for t in range(plan.guided_trials):
            prompt = guided_tpl.substitute(
                question=q.text,
                frame=frame_2 if t % 2 else frame_1,
                answer_instruction=instruction,
            )
            tasks.append(
                _Task(
                    q.question_id,
                    Source.GUIDED,
                    t,
                    prompt,
                    plan.temperature,
                    _derive_seed(q.question_id, "guided", t),
                )
            )

    own = client is None
    client = client or EndpointClient(cfg)
    try:
        pools = _run_tasks(client, tasks, fmt, plan.max_tokens)
    finally:
        if own:
            client.close()
    return {q.question_id: pools.get(q.question_id, []) for q in questions}


def collect_pool(
    questions: Sequence[Question],
    fmt: TaskFormat,
    cfg: EndpointConfig,
    plan: PromptPlan,
    transport: httpx.BaseTransport | None = None,
) -> tuple[dict[str, list[Candidate]], dict[str, dict[int, str]], list[dict[str, Any]]]:
    """Full collection pass: sample, cluster, describe, collect evidence.

    Returns per-question candidate lists (raw + greedy + auxiliary, sorted
    by source then trial), the extracted frames, and the request/response
    transcript rows.
    """
    with EndpointClient(cfg, transport=transport) as client:
        pools = collect_raw_pool(questions, fmt, cfg, plan, client=client)
        basin_sets: dict[str, BasinSet] = {}
        frames: dict[str, dict[int, str]] = {}
        for q in questions:
            try:
                basins = build_basins(pools[q.question_id], fmt, q.question_id)
            except EmptyBasinSetError:
                continue  # no valid raw candidate; nothing to arbitrate
            basin_sets[q.question_id] = basins
            if basins.m >= 2 and (plan.panel_trials or plan.guided_trials):
                frames[q.question_id] = describe_basins(
                    basins, cfg, q.text, plan, client=client
                )
        evidence = collect_evidence(
            questions, basin_sets, frames, fmt, cfg, plan, client=client
        )
        for q in questions:
            pools[q.question_id].extend(evidence.get(q.question_id, []))
            pools[q.question_id].sort(key=lambda c: (SOURCE_ORDER[c.source], c.index))
        label_order = {src.value: i for src, i in SOURCE_ORDER.items()}
        label_order["frame_extract"] = len(label_order)
        transcript = sorted(
            client.transcript,
            key=lambda r: (r["question_id"], label_order[r["source"]], r["trial"]),
        )
    return pools, frames, transcript
