"""Bit-stable JSONL/JSON artifact schemas and encoders.

One JSON object per line, UTF-8, keys in schema order, floats written with
Python's shortest round-trip representation so that parsing a file and
re-serializing it is byte-identical. Simulated and collected pools share
one schema and are indistinguishable downstream.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping

from .basin import Basin, BasinSet, Candidate, Source
from .delta import DeltaDecision
from .metrics import CorrectionReport
from .normalize import NormalizedAnswer

BASELINE_POOL = "baseline_pool.jsonl"
EVIDENCE_POOL = "evidence_pool.jsonl"
CLUSTERS = "clusters.jsonl"
GOLD = "gold.jsonl"
QUESTIONS = "questions.jsonl"
BASIN_FRAMES = "basin_frames.jsonl"
DELTA_DIAGNOSTICS = "delta_qid_diagnostics.jsonl"
PER_EXAMPLE = "per_example.jsonl"
RESIDUAL_INPUTS = "residual_inputs.jsonl"
TRANSCRIPT = "transcript.jsonl"
POLICY_SUMMARY = "policy_summary.json"
RUN_SUMMARY = "run_summary.json"
SUMMARY = "summary.json"
REPORT_TXT = "report.txt"
REPORT_CSV = "report.csv"


class SchemaError(ValueError):
    """A record does not satisfy its schema; the message names the field."""


class MalformedLineError(ValueError):
    def __init__(self, path: Path | str, line_no: int, reason: str) -> None:
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


class ArtifactIOError(OSError):
    pass


@dataclass(frozen=True)
class FieldSpec:
    name: str
    types: tuple[type, ...]
    nullable: bool = False
    required: bool = True
    check: Callable[[Any], bool] | None = None  # extra structural validation

    def validate(self, value: Any) -> None:
        if value is None:
            if not self.nullable:
                raise SchemaError(f"field {self.name!r} must not be null")
            return
        # bool is an int subclass; require the exact intent.
        if bool in self.types:
            if not isinstance(value, bool):
                raise SchemaError(f"field {self.name!r} must be a boolean")
        elif isinstance(value, bool) or not isinstance(value, self.types):
            expected = "/".join(t.__name__ for t in self.types)
            raise SchemaError(f"field {self.name!r} must be {expected}")
        if self.check is not None and not self.check(value):
            raise SchemaError(f"field {self.name!r} has malformed structure")


@dataclass(frozen=True)
class RecordSchema:
    name: str
    fields: tuple[FieldSpec, ...]

    def validate(self, record: Mapping[str, Any]) -> dict[str, Any]:
        """Validate and return the record with keys in schema order."""
        known = {f.name for f in self.fields}
        for key in record:
            if key not in known:
                raise SchemaError(f"field {key!r} is not part of schema {self.name!r}")
        out: dict[str, Any] = {}
        for spec in self.fields:
            if spec.name not in record:
                if spec.required:
                    raise SchemaError(
                        f"field {spec.name!r} is missing from a {self.name!r} record"
                    )
                continue
            value = record[spec.name]
            spec.validate(value)
            out[spec.name] = value
        return out


def _is_basin_list(value: Any) -> bool:
    if not isinstance(value, list):
        return False
    for item in value:
        if not isinstance(item, dict):
            return False
        if set(item) != {"answer", "size", "members"}:
            return False
        if not isinstance(item["answer"], str) or not isinstance(item["size"], int):
            return False
        members = item["members"]
        if not isinstance(members, list) or not all(
            isinstance(i, int) and not isinstance(i, bool) for i in members
        ):
            return False
    return True


_SOURCE_VALUES = {src.value for src in Source}

POOL_SCHEMA = RecordSchema(
    "pool",
    (
        FieldSpec("question_id", (str,)),
        FieldSpec("source", (str,), check=lambda v: v in _SOURCE_VALUES),
        FieldSpec("index", (int,)),
        FieldSpec("temperature", (float, int)),
        FieldSpec("seed", (int,)),
        FieldSpec("text", (str,)),
        FieldSpec("answer", (str,)),
        FieldSpec("valid", (bool,)),
    ),
)

QUESTION_SCHEMA = RecordSchema(
    "question",
    (
        FieldSpec("question_id", (str,)),
        FieldSpec("text", (str,)),
    ),
)

GOLD_SCHEMA = RecordSchema(
    "gold",
    (
        FieldSpec("question_id", (str,)),
        FieldSpec("answer", (str,)),
    ),
)

CLUSTERS_SCHEMA = RecordSchema(
    "clusters",
    (
        FieldSpec("question_id", (str,)),
        FieldSpec("consensus_answer", (str,)),
        FieldSpec("raw_attempted", (int,)),
        FieldSpec("basins", (list,), check=_is_basin_list),
    ),
)

BASIN_FRAME_SCHEMA = RecordSchema(
    "basin_frame",
    (
        FieldSpec("question_id", (str,)),
        FieldSpec("rank", (int,)),
        FieldSpec("frame", (str,)),
    ),
)

DIAGNOSTICS_SCHEMA = RecordSchema(
    "delta_diagnostics",
    (
        FieldSpec("question_id", (str,)),
        FieldSpec("m", (int,)),
        FieldSpec("has_challenger", (bool,)),
        FieldSpec("baseline_answer", (str,)),
        FieldSpec("selected_answer", (str,)),
        FieldSpec("selected_rank", (int,)),
        FieldSpec("override", (bool,)),
        FieldSpec("challenger_rank", (int,), nullable=True),
        FieldSpec("challenger_answer", (str,), nullable=True),
        FieldSpec("score", (float, int), nullable=True),
        FieldSpec("raw_term", (float, int), nullable=True),
        FieldSpec("framed_term", (float, int), nullable=True),
        FieldSpec("guided_term", (float, int), nullable=True),
        FieldSpec("panel_term", (float, int), nullable=True),
        FieldSpec("residual_term", (float, int), nullable=True),
        FieldSpec("r_f", (float, int), nullable=True),
        FieldSpec("r_g", (float, int), nullable=True),
        FieldSpec("rho_p", (float, int), nullable=True),
        FieldSpec("b1", (int,)),
        FieldSpec("b2", (int,), nullable=True),
        FieldSpec("f1", (int,), nullable=True),
        FieldSpec("f2", (int,), nullable=True),
        FieldSpec("g1", (int,), nullable=True),
        FieldSpec("g2", (int,), nullable=True),
        FieldSpec("p1", (int,), nullable=True),
        FieldSpec("p2", (int,), nullable=True),
        FieldSpec("attempted_framed", (int,)),
        FieldSpec("attempted_guided", (int,)),
        FieldSpec("attempted_panel_original", (int,)),
        FieldSpec("attempted_panel_swapped", (int,)),
    ),
)

PER_EXAMPLE_SCHEMA = RecordSchema(
    "per_example",
    (
        FieldSpec("question_id", (str,)),
        FieldSpec("baseline_answer", (str,)),
        FieldSpec("predicted_answer", (str,)),
        FieldSpec("gold_answer", (str,)),
        FieldSpec("baseline_correct", (bool,)),
        FieldSpec("predicted_correct", (bool,)),
        FieldSpec("override", (bool,)),
        FieldSpec("recovered", (bool,)),
        FieldSpec("degraded", (bool,)),
        FieldSpec("m", (int,)),
        FieldSpec("gold_rank", (int,), nullable=True),
        FieldSpec("wrong_majority", (bool,)),
    ),
)

RESIDUAL_SCHEMA = RecordSchema(
    "residual_input",
    (
        FieldSpec("question_id", (str,)),
        FieldSpec("rank", (int,)),
        FieldSpec("residual", (float, int)),
        FieldSpec("permission", (float, int), required=False),
    ),
)

TRANSCRIPT_SCHEMA = RecordSchema(
    "transcript",
    (
        FieldSpec("question_id", (str,)),
        FieldSpec("source", (str,)),
        FieldSpec("trial", (int,)),
        FieldSpec("request", (dict,)),
        FieldSpec("response", (dict,), nullable=True),
        FieldSpec("error", (str,), nullable=True),
    ),
)


def _format_float(value: float) -> str:
    if not math.isfinite(value):
        raise SchemaError(f"non-finite real value {value!r} cannot be serialized")
    text = repr(float(value))
    # keep floats floats on re-parse
    if text.isdigit() or (text[0] == "-" and text[1:].isdigit()):
        text += ".0"
    return text


def _encode(value: Any, indent: int | None, level: int) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _format_float(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        items = [_encode(v, indent, level + 1) for v in value]
        return _wrap("[", items, "]", indent, level)
    if isinstance(value, Mapping):
        items = [
            f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}"
            for k, v in value.items()
        ]
        return _wrap("{", items, "}", indent, level)
    raise SchemaError(f"value of type {type(value).__name__} cannot be serialized")


def _wrap(opener: str, items: list[str], closer: str, indent: int | None, level: int) -> str:
    if indent is None or not items:
        return opener + ", ".join(items) + closer
    pad = " " * (indent * (level + 1))
    inner = (",\n" + pad).join(items)
    return f"{opener}\n{pad}{inner}\n{' ' * (indent * level)}{closer}"


def dumps_record(record: Mapping[str, Any]) -> str:
    """Compact single-line JSON with deterministic float text."""
    return _encode(record, indent=None, level=0)


def write_jsonl(
    records: Iterable[Mapping[str, Any]], path: Path | str, schema: RecordSchema
) -> int:
    """Validate and write records one JSON object per line; returns the count."""
    path = Path(path)
    lines = [dumps_record(schema.validate(r)) for r in records]
    try:
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc
    return len(lines)


class JsonlReader:
    """Streaming JSONL reader.

    Strict mode aborts on the first malformed or schema-invalid line,
    reporting its line number; lenient mode skips such lines and counts
    them in ``skipped``.
    """

    def __init__(self, path: Path | str, schema: RecordSchema, strict: bool = True) -> None:
        self.path = Path(path)
        self.schema = schema
        self.strict = strict
        self.skipped = 0

    def __iter__(self) -> Iterator[dict[str, Any]]:
        with self.path.open(encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                    if not isinstance(raw, dict):
                        raise SchemaError("line is not a JSON object")
                    yield self.schema.validate(raw)
                except (json.JSONDecodeError, SchemaError) as exc:
                    if self.strict:
                        raise MalformedLineError(self.path, line_no, str(exc)) from exc
                    self.skipped += 1


def read_jsonl(
    path: Path | str, schema: RecordSchema, strict: bool = True
) -> JsonlReader:
    return JsonlReader(path, schema, strict=strict)


def write_json(obj: Mapping[str, Any], path: Path | str) -> None:
    """Pretty-printed JSON document with the same float conventions."""
    path = Path(path)
    try:
        path.write_text(_encode(obj, indent=2, level=0) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc


def read_json(path: Path | str) -> dict[str, Any]:
    with Path(path).open(encoding="utf-8") as handle:
        return json.load(handle)


def config_digest(config: Mapping[str, Any]) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# dataclass <-> row converters


def pool_row(question_id: str, cand: Candidate) -> dict[str, Any]:
    return {
        "question_id": question_id,
        "source": cand.source.value,
        "index": cand.index,
        "temperature": cand.temperature,
        "seed": cand.seed,
        "text": cand.text,
        "answer": cand.answer.canonical,
        "valid": cand.answer.valid,
    }


def candidate_from_row(row: Mapping[str, Any]) -> Candidate:
    return Candidate(
        index=int(row["index"]),
        text=str(row["text"]),
        answer=NormalizedAnswer(str(row["answer"]), bool(row["valid"])),
        source=Source(str(row["source"])),
        temperature=float(row["temperature"]),
        seed=int(row["seed"]),
    )


def clusters_row(basins: BasinSet) -> dict[str, Any]:
    return {
        "question_id": basins.question_id,
        "consensus_answer": basins.consensus_answer,
        "raw_attempted": basins.raw_attempted,
        "basins": [
            {"answer": b.answer, "size": b.size, "members": list(b.members)}
            for b in basins.basins
        ],
    }


def basinset_from_row(row: Mapping[str, Any]) -> BasinSet:
    basins = tuple(
        Basin(answer=b["answer"], members=tuple(b["members"]), size=b["size"])
        for b in row["basins"]  # type: ignore[union-attr]
    )
    return BasinSet(
        question_id=str(row["question_id"]),
        basins=basins,
        consensus_answer=str(row["consensus_answer"]),
        raw_attempted=int(row["raw_attempted"]),
    )


def diagnostics_row(
    basins: BasinSet,
    decision: DeltaDecision | None,
    ledger_counts: Mapping[str, int | None],
    attempted: Mapping[str, int],
    selected_answer: str,
) -> dict[str, Any]:
    """Flatten one per-question decision (or consensus pass-through) to a row.

    The *2 columns describe the challenger the decision compared, whichever
    rank that was; rows without a challenger carry nulls there.
    """
    rank = decision.challenger_rank if decision else 2
    row: dict[str, Any] = {
        "question_id": basins.question_id,
        "m": basins.m,
        "has_challenger": decision is not None,
        "baseline_answer": basins.consensus_answer,
        "selected_answer": selected_answer,
        "selected_rank": decision.selected_rank if decision else 1,
        "override": decision.override if decision else False,
        "challenger_rank": decision.challenger_rank if decision else None,
        "challenger_answer": (
            basins.answer_at(decision.challenger_rank) if decision else None
        ),
        "score": decision.score if decision else None,
        "raw_term": decision.raw_term if decision else None,
        "framed_term": decision.framed_term if decision else None,
        "guided_term": decision.guided_term if decision else None,
        "panel_term": decision.panel_term if decision else None,
        "residual_term": decision.residual_term if decision else None,
        "r_f": decision.reliabilities.r_f if decision else None,
        "r_g": decision.reliabilities.r_g if decision else None,
        "rho_p": decision.reliabilities.rho_p if decision else None,
        "b1": basins.size_at(1),
        "b2": basins.size_at(rank) if basins.m >= rank else None,
    }
    row.update(ledger_counts)
    row.update(attempted)
    return row


def report_to_summary(report: CorrectionReport, label: str = "") -> dict[str, Any]:
    return {
        "label": label,
        "n": report.n,
        "baseline_correct": report.baseline_correct,
        "final_correct": report.final_correct,
        "overrides": report.overrides,
        "recovered": report.recovered,
        "degraded": report.degraded,
        "wrong_to_wrong": report.wrong_to_wrong,
        "net": report.net,
        "accuracy_baseline_pct": report.accuracy_baseline,
        "accuracy_final_pct": report.accuracy_final,
        "gain_pp": report.gain_pp,
        "oracle_at": {
            str(k): {"rate_pct": stat.rate_pct, "extra_correct": stat.extra_correct}
            for k, stat in sorted(report.oracle_at.items())
        },
        "wrong_majority_count": report.wm_count,
    }
