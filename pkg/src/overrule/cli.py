"""Command-line pipeline: sample, cluster, describe, collect evidence, score.

Subcommands mirror the pipeline stages plus simulation and reporting:

  simulate   emit synthetic pools with planted gold answers
  collect    gather live pools/evidence from an OpenAI-compatible endpoint
  cluster    build ranked answer basins from a pool file
  score      run the override rule (plus optional residual) over a pool
  evaluate   join predictions with gold labels into a correction report
  report     render one or more summaries as a text table plus CSV

Flags override config-file values, which override defaults; the effective
configuration is digested into every run summary so runs are replayable.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import artifacts
from .artifacts import (
    ArtifactIOError,
    MalformedLineError,
    SchemaError,
    read_json,
    read_jsonl,
    write_json,
    write_jsonl,
)
from .basin import BasinSet, Candidate, Source, build_basins
from .collect import (
    EndpointAuthError,
    EndpointConfig,
    PromptPlan,
    Question,
    collect_pool,
)
from .delta import PolicyConfig, SourceSet
from .evidence import EvidenceLedger
from .metrics import (
    CorrectionReport,
    GoldLabel,
    example_outcomes,
    round_half_up,
    score_run,
)
from .normalize import TaskFormat, canonicalize_label
from .pipeline import QuestionDecision, decide_question
from .residual import ResidualConfig, residual_map
from .simulate import DEFAULT_FIDELITIES, SimConfig, SimInstance, generate


def _fmt(value: str) -> TaskFormat:
    try:
        return TaskFormat(value)
    except ValueError:
        choices = ", ".join(f.value for f in TaskFormat)
        raise ValueError(f"unknown format {value!r} (choose from {choices})") from None


def _effective_config(
    defaults: Mapping[str, Any], args: argparse.Namespace, config_key: str = "config"
) -> dict[str, Any]:
    """defaults < config file < explicitly passed flags."""
    cfg = dict(defaults)
    config_path = getattr(args, config_key, None)
    if config_path:
        file_cfg = read_json(config_path)
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise ValueError(
                f"unknown config keys in {config_path}: {', '.join(unknown)}"
            )
        cfg.update(file_cfg)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _write_run_summary(
    out_dir: Path,
    command: str,
    config: Mapping[str, Any],
    timings: Mapping[str, float],
    raw_k: int | None = None,
    greedy_generated: bool = False,
    model_name: str | None = None,
    dataset: str | None = None,
) -> None:
    digest = artifacts.config_digest(config)
    write_json(
        {
            "run_id": f"{command}-{digest[:12]}",
            "command": command,
            "raw_K": raw_k,
            "greedy_generated": greedy_generated,
            "greedy_in_consensus": False,
            "model_name": model_name,
            "dataset": dataset,
            "config": dict(config),
            "config_digest": digest,
            "timings": dict(timings),
        },
        out_dir / artifacts.RUN_SUMMARY,
    )


def _read_pool_map(path: Path) -> dict[str, list[Candidate]]:
    pools: dict[str, list[Candidate]] = {}
    for row in read_jsonl(path, artifacts.POOL_SCHEMA):
        pools.setdefault(str(row["question_id"]), []).append(
            artifacts.candidate_from_row(row)
        )
    return pools


def _pool_rows(pools: Mapping[str, list[Candidate]]) -> list[dict[str, Any]]:
    return [
        artifacts.pool_row(qid, cand)
        for qid in sorted(pools)
        for cand in pools[qid]
    ]


# ---------------------------------------------------------------------------
# simulate


_SIM_DEFAULTS: dict[str, Any] = {
    "n": 100,
    "k_raw": 24,
    "seed": 0,
    "wm_rate": 0.1,
    "gold_absent_rate": 0.0,
    "off_pair_rate": 0.05,
    "fidelity": 0.7,
    "framed_trials": 24,
    "panel_trials": 12,
    "guided_trials": 4,
    "temperature": 0.8,
    "greedy": False,
    "basin_dist": {"1": 0.45, "2": 0.35, "3": 0.15, "4": 0.05},
}


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _effective_config(_SIM_DEFAULTS, args)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sim_cfg = SimConfig(
        n_questions=int(cfg["n"]),
        k_raw=int(cfg["k_raw"]),
        basin_count_distribution={int(k): float(v) for k, v in cfg["basin_dist"].items()},
        wrong_majority_rate=float(cfg["wm_rate"]),
        gold_absent_rate=float(cfg["gold_absent_rate"]),
        source_fidelities={src: float(cfg["fidelity"]) for src in DEFAULT_FIDELITIES},
        off_pair_rate=float(cfg["off_pair_rate"]),
        framed_trials=int(cfg["framed_trials"]),
        panel_trials=int(cfg["panel_trials"]),
        guided_trials=int(cfg["guided_trials"]),
        temperature=float(cfg["temperature"]),
        include_greedy=bool(cfg["greedy"]),
        rng_seed=int(cfg["seed"]),
    )
    t0 = time.perf_counter()
    instances = generate(sim_cfg)
    t1 = time.perf_counter()
    _write_sim_artifacts(out_dir, instances)
    _write_run_summary(
        out_dir,
        "simulate",
        cfg,
        {"generate_s": t1 - t0, "write_s": time.perf_counter() - t1},
        raw_k=sim_cfg.k_raw,
        greedy_generated=sim_cfg.include_greedy,
        model_name="simulator",
        dataset="synthetic",
    )
    print(f"simulated {len(instances)} questions into {out_dir}")
    return 0


def _write_sim_artifacts(out_dir: Path, instances: Sequence[SimInstance]) -> None:
    write_jsonl(
        _pool_rows({inst.question_id: inst.pool for inst in instances}),
        out_dir / artifacts.BASELINE_POOL,
        artifacts.POOL_SCHEMA,
    )
    write_jsonl(
        _pool_rows({inst.question_id: inst.evidence for inst in instances}),
        out_dir / artifacts.EVIDENCE_POOL,
        artifacts.POOL_SCHEMA,
    )
    write_jsonl(
        [
            {"question_id": inst.question_id, "answer": inst.gold.answer}
            for inst in sorted(instances, key=lambda x: x.question_id)
        ],
        out_dir / artifacts.GOLD,
        artifacts.GOLD_SCHEMA,
    )


# ---------------------------------------------------------------------------
# cluster


def cmd_cluster(args: argparse.Namespace) -> int:
    fmt = _fmt(args.format)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    pools = _read_pool_map(Path(args.pool))
    rows = []
    for qid in sorted(pools):
        rows.append(artifacts.clusters_row(build_basins(pools[qid], fmt, qid)))
    write_jsonl(rows, out_dir / artifacts.CLUSTERS, artifacts.CLUSTERS_SCHEMA)
    cfg = {"pool": str(args.pool), "format": fmt.value}
    _write_run_summary(
        out_dir, "cluster", cfg, {"total_s": time.perf_counter() - t0}
    )
    multi = sum(1 for r in rows if len(r["basins"]) >= 2)
    print(f"clustered {len(rows)} questions ({multi} with challengers) into {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# score


_SCORE_DEFAULTS: dict[str, Any] = {
    "source_set": SourceSet.FRAMED_GUIDED.value,
    "alpha": 1.0,
    "challenger_rank": 2,
    "unit_reliability": False,
    "residual_scale": 0.0,
    "residual_clip": 1.0,
    "permission": True,
    "jobs": 1,
}


def _ledger_breakdown(
    basins: BasinSet, ledger: EvidenceLedger, rank: int
) -> tuple[dict[str, int | None], dict[str, int]]:
    if basins.m >= rank:
        f1, f2 = ledger.pair_counts(Source.FRAMED, basins, rank)
        g1, g2 = ledger.pair_counts(Source.GUIDED, basins, rank)
        p1, p2 = ledger.panel_counts(basins, rank)
        counts: dict[str, int | None] = {
            "f1": f1, "f2": f2, "g1": g1, "g2": g2, "p1": p1, "p2": p2,
        }
    else:
        counts = {"f1": None, "f2": None, "g1": None, "g2": None, "p1": None, "p2": None}
    attempted = {
        "attempted_framed": ledger.attempted(Source.FRAMED),
        "attempted_guided": ledger.attempted(Source.GUIDED),
        "attempted_panel_original": ledger.attempted(Source.PANEL_ORIGINAL),
        "attempted_panel_swapped": ledger.attempted(Source.PANEL_SWAPPED),
    }
    return counts, attempted


def cmd_score(args: argparse.Namespace) -> int:
    fmt = _fmt(args.format)
    cfg = _effective_config(_SCORE_DEFAULTS, args)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    policy = PolicyConfig(
        source_set=SourceSet(cfg["source_set"]),
        alpha=float(cfg["alpha"]),
        challenger_rank=int(cfg["challenger_rank"]),
        unit_reliability=bool(cfg["unit_reliability"]),
    )
    residual_cfg = ResidualConfig(
        scale=float(cfg["residual_scale"]),
        clip_bound=float(cfg["residual_clip"]),
        use_permission=bool(cfg["permission"]),
    )
    residuals = None
    if args.residual_inputs:
        residuals = residual_map(
            read_jsonl(Path(args.residual_inputs), artifacts.RESIDUAL_SCHEMA)
        )

    t0 = time.perf_counter()
    pools = _read_pool_map(Path(args.pool))
    # auxiliary candidates may ride along in the pool file or come separately
    evidence: dict[str, list[Candidate]] = {
        qid: [c for c in cands if c.source not in (Source.RAW, Source.GREEDY)]
        for qid, cands in pools.items()
    }
    if args.evidence:
        for qid, cands in _read_pool_map(Path(args.evidence)).items():
            if qid not in pools:
                raise ValueError(f"evidence references unknown question {qid!r}")
            evidence[qid].extend(
                c for c in cands if c.source not in (Source.RAW, Source.GREEDY)
            )
    t_read = time.perf_counter()

    qids = sorted(pools)

    def run_one(qid: str) -> QuestionDecision:
        basins = build_basins(pools[qid], fmt, qid)
        return decide_question(
            basins, evidence[qid], fmt, policy, residual_cfg, residuals
        )

    jobs = max(1, int(cfg["jobs"]))
    if jobs == 1:
        outcomes = [run_one(qid) for qid in qids]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_one, qids))
    t_score = time.perf_counter()

    rows = []
    overrides = with_challenger = 0
    for outcome in outcomes:
        counts, attempted = _ledger_breakdown(
            outcome.basins, outcome.ledger, policy.challenger_rank
        )
        rows.append(
            artifacts.diagnostics_row(
                outcome.basins, outcome.decision, counts, attempted, outcome.prediction
            )
        )
        overrides += outcome.override
        with_challenger += outcome.decision is not None
    write_jsonl(rows, out_dir / artifacts.DELTA_DIAGNOSTICS, artifacts.DIAGNOSTICS_SCHEMA)

    summary = {
        "questions": len(qids),
        "with_challenger": with_challenger,
        "overrides": overrides,
        "policy": {
            "source_set": policy.source_set.value,
            "alpha": policy.alpha,
            "challenger_rank": policy.challenger_rank,
            "unit_reliability": policy.unit_reliability,
            "residual_scale": residual_cfg.scale,
            "residual_clip": residual_cfg.clip_bound,
            "residual_permission": residual_cfg.use_permission,
        },
        "attempted_totals": {
            src.value: sum(o.ledger.attempted(src) for o in outcomes)
            for src in (
                Source.FRAMED,
                Source.GUIDED,
                Source.PANEL_ORIGINAL,
                Source.PANEL_SWAPPED,
            )
        },
    }
    write_json(summary, out_dir / artifacts.POLICY_SUMMARY)
    full_cfg = dict(cfg)
    full_cfg.update(
        {"pool": str(args.pool), "evidence": str(args.evidence or ""), "format": fmt.value}
    )
    _write_run_summary(
        out_dir,
        "score",
        full_cfg,
        {"read_s": t_read - t0, "score_s": t_score - t_read,
         "write_s": time.perf_counter() - t_score},
        raw_k=max((o.basins.raw_attempted for o in outcomes), default=None),
    )
    print(
        f"scored {len(qids)} questions: {with_challenger} with challengers, "
        f"{overrides} overrides"
    )
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _load_gold(path: Path, fmt: TaskFormat, normalize: bool) -> dict[str, GoldLabel]:
    gold = {}
    for row in read_jsonl(path, artifacts.GOLD_SCHEMA):
        qid = str(row["question_id"])
        answer = str(row["answer"])
        if normalize:
            answer = canonicalize_label(answer, fmt)
        gold[qid] = GoldLabel(question_id=qid, answer=answer)
    return gold


def cmd_evaluate(args: argparse.Namespace) -> int:
    fmt = _fmt(args.format)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    oracle_ks = tuple(int(k) for k in args.oracle_ks.split(","))

    t0 = time.perf_counter()
    pools = _read_pool_map(Path(args.pool))
    basins = {qid: build_basins(pools[qid], fmt, qid) for qid in sorted(pools)}
    predictions: dict[str, str] = {}
    baselines: dict[str, str] = {}
    for row in read_jsonl(Path(args.diagnostics), artifacts.DIAGNOSTICS_SCHEMA):
        qid = str(row["question_id"])
        if qid in basins and row["baseline_answer"] != basins[qid].consensus_answer:
            raise ValueError(
                f"diagnostics disagree with pool on consensus for {qid!r}; "
                "re-run score on this pool"
            )
        predictions[qid] = str(row["selected_answer"])
        baselines[qid] = str(row["baseline_answer"])
        if row["override"]:
            print(
                f"q={qid} Δ2={float(row['score']):.3f} override → "
                f"B{row['selected_rank']} ({row['selected_answer']!r})"
            )
    gold = _load_gold(Path(args.gold), fmt, args.normalize_gold or False)

    report = score_run(predictions, baselines, basins, gold, fmt, oracle_ks)
    rows = list(example_outcomes(predictions, baselines, basins, gold, fmt))
    write_jsonl(rows, out_dir / artifacts.PER_EXAMPLE, artifacts.PER_EXAMPLE_SCHEMA)
    write_json(
        artifacts.report_to_summary(report, label=args.label or ""),
        out_dir / artifacts.SUMMARY,
    )
    cfg = {
        "pool": str(args.pool),
        "diagnostics": str(args.diagnostics),
        "gold": str(args.gold),
        "format": fmt.value,
        "oracle_ks": list(oracle_ks),
        "normalize_gold": bool(args.normalize_gold),
        "label": args.label or "",
    }
    _write_run_summary(out_dir, "evaluate", cfg, {"total_s": time.perf_counter() - t0})
    _print_report(report)
    return 0


def _print_report(report: CorrectionReport) -> None:
    print(f"n={report.n}")
    print(
        f"baseline: {round_half_up(report.accuracy_baseline)}% "
        f"({report.baseline_correct}/{report.n})   "
        f"final: {round_half_up(report.accuracy_final)}% "
        f"({report.final_correct}/{report.n})"
    )
    print(
        f"overrides: {report.overrides}  recovered: {report.recovered}  "
        f"degraded: {report.degraded}  wrong→wrong: {report.wrong_to_wrong}  "
        f"net: {report.net:+d}  gain: {round_half_up(report.gain_pp)} pp"
    )
    oracle_bits = [
        f"oracle@{k}: {round_half_up(stat.rate_pct)}% (+{stat.extra_correct})"
        for k, stat in sorted(report.oracle_at.items())
    ]
    print("  ".join(oracle_bits))
    print(f"wrong-majority cases: {report.wm_count}")


# ---------------------------------------------------------------------------
# report


_REPORT_COLUMNS = (
    "label", "n", "baseline_pct", "final_pct", "gain_pp",
    "overrides", "recovered", "degraded", "net",
)


def cmd_report(args: argparse.Namespace) -> int:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    oracle_ks: list[int] = []
    for path in args.summary:
        summary = read_json(path)
        row = {
            "label": summary.get("label") or Path(path).parent.name,
            "n": summary["n"],
            "baseline_pct": round_half_up(summary["accuracy_baseline_pct"]),
            "final_pct": round_half_up(summary["accuracy_final_pct"]),
            "gain_pp": round_half_up(summary["gain_pp"]),
            "overrides": summary["overrides"],
            "recovered": summary["recovered"],
            "degraded": summary["degraded"],
            "net": summary["net"],
        }
        for k, stat in sorted(summary.get("oracle_at", {}).items(), key=lambda kv: int(kv[0])):
            if int(k) not in oracle_ks:
                oracle_ks.append(int(k))
            row[f"oracle@{k}_pct"] = round_half_up(stat["rate_pct"])
            row[f"oracle@{k}_extra"] = stat["extra_correct"]
        rows.append(row)

    table = _render_table(rows)
    (out_dir / artifacts.REPORT_TXT).write_text(table + "\n", encoding="utf-8")
    csv_columns = list(_REPORT_COLUMNS) + [
        col for k in oracle_ks for col in (f"oracle@{k}_pct", f"oracle@{k}_extra")
    ]
    csv_lines = [",".join(csv_columns)]
    for row in rows:
        csv_lines.append(",".join(str(row.get(col, "")) for col in csv_columns))
    (out_dir / artifacts.REPORT_CSV).write_text(
        "\n".join(csv_lines) + "\n", encoding="utf-8"
    )
    print(table)
    return 0


def _render_table(rows: list[dict[str, Any]]) -> str:
    headers = {
        "label": "Run", "n": "N", "baseline_pct": "Baseline", "final_pct": "Final",
        "gain_pp": "Gain (pp)", "odr": "Over./Rec./Deg.", "net": "Net",
    }
    cells = []
    for row in rows:
        cells.append(
            {
                "label": str(row["label"]),
                "n": str(row["n"]),
                "baseline_pct": str(row["baseline_pct"]),
                "final_pct": str(row["final_pct"]),
                "gain_pp": f"{'+' if float(row['gain_pp']) >= 0 else ''}{row['gain_pp']}",
                "odr": f"{row['overrides']} / {row['recovered']} / {row['degraded']}",
                "net": f"{row['net']:+d}",
            }
        )
    widths = {
        key: max(len(headers[key]), *(len(c[key]) for c in cells)) if cells else len(headers[key])
        for key in headers
    }
    lines = [
        "  ".join(headers[k].ljust(widths[k]) for k in headers).rstrip(),
        "  ".join("-" * widths[k] for k in headers),
    ]
    for cell in cells:
        lines.append("  ".join(cell[k].ljust(widths[k]) for k in headers).rstrip())
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# collect


_COLLECT_DEFAULTS: dict[str, Any] = {
    "raw_solves": 24,
    "framed_solves": 24,
    "panel_trials": 12,
    "guided_trials": 4,
    "greedy": False,
    "temperature": 0.8,
    "max_tokens": 1024,
    "timeout": 60.0,
    "max_parallel": 4,
    "retry_budget": 2,
}


def cmd_collect(args: argparse.Namespace) -> int:
    fmt = _fmt(args.format)
    cfg = _effective_config(_COLLECT_DEFAULTS, args)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    questions = [
        Question(question_id=str(row["question_id"]), text=str(row["text"]))
        for row in read_jsonl(Path(args.questions), artifacts.QUESTION_SCHEMA)
    ]
    endpoint = EndpointConfig(
        base_url=args.base_url,
        model_name=args.model,
        timeout=float(cfg["timeout"]),
        max_parallel=int(cfg["max_parallel"]),
        retry_budget=int(cfg["retry_budget"]),
    )
    plan = PromptPlan(
        raw_solves=int(cfg["raw_solves"]),
        framed_solves=int(cfg["framed_solves"]),
        panel_trials=int(cfg["panel_trials"]),
        guided_trials=int(cfg["guided_trials"]),
        greedy_solve=bool(cfg["greedy"]),
        temperature=float(cfg["temperature"]),
        max_tokens=int(cfg["max_tokens"]),
        template_dir=Path(args.templates) if args.templates else None,
    )

    t0 = time.perf_counter()
    pools, frames, transcript = collect_pool(questions, fmt, endpoint, plan)
    t1 = time.perf_counter()

    baseline = {
        qid: [c for c in cands if c.source in (Source.RAW, Source.GREEDY)]
        for qid, cands in pools.items()
    }
    evidence = {
        qid: [c for c in cands if c.source not in (Source.RAW, Source.GREEDY)]
        for qid, cands in pools.items()
    }
    write_jsonl(_pool_rows(baseline), out_dir / artifacts.BASELINE_POOL, artifacts.POOL_SCHEMA)
    write_jsonl(_pool_rows(evidence), out_dir / artifacts.EVIDENCE_POOL, artifacts.POOL_SCHEMA)
    write_jsonl(
        [
            {"question_id": qid, "rank": rank, "frame": frame}
            for qid in sorted(frames)
            for rank, frame in sorted(frames[qid].items())
        ],
        out_dir / artifacts.BASIN_FRAMES,
        artifacts.BASIN_FRAME_SCHEMA,
    )
    if args.transcript:
        write_jsonl(transcript, out_dir / artifacts.TRANSCRIPT, artifacts.TRANSCRIPT_SCHEMA)

    full_cfg = dict(cfg)
    full_cfg.update(
        {
            "questions": str(args.questions),
            "format": fmt.value,
            "base_url": args.base_url,
            "model": args.model,
        }
    )
    _write_run_summary(
        out_dir,
        "collect",
        full_cfg,
        {"collect_s": t1 - t0, "write_s": time.perf_counter() - t1},
        raw_k=plan.raw_solves,
        greedy_generated=plan.greedy_solve,
        model_name=args.model,
    )
    n_candidates = sum(len(c) for c in pools.values())
    print(
        f"collected {n_candidates} candidates over {len(questions)} questions "
        f"into {out_dir}"
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overrule",
        description="Post-consensus arbitration over pools of sampled answers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--output-dir", required=True, help="directory for artifacts")
        p.add_argument("--config", help="flat JSON config file (flags win)")

    p = sub.add_parser("simulate", help="generate synthetic pools with planted gold")
    add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--k-raw", dest="k_raw", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--wm-rate", dest="wm_rate", type=float)
    p.add_argument("--gold-absent-rate", dest="gold_absent_rate", type=float)
    p.add_argument("--off-pair-rate", dest="off_pair_rate", type=float)
    p.add_argument("--fidelity", type=float, help="gold-basin landing rate for all sources")
    p.add_argument("--framed-trials", dest="framed_trials", type=int)
    p.add_argument("--panel-trials", dest="panel_trials", type=int)
    p.add_argument("--guided-trials", dest="guided_trials", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--greedy", action=argparse.BooleanOptionalAction, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cluster", help="build ranked answer basins from a pool")
    add_common(p)
    p.add_argument("--pool", required=True)
    p.add_argument("--format", required=True, help="numeric | multiple_choice | boxed")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("score", help="run the override rule over a pool")
    add_common(p)
    p.add_argument("--pool", required=True)
    p.add_argument("--evidence", help="auxiliary-output pool (omit for raw-only)")
    p.add_argument("--format", required=True)
    p.add_argument("--source-set", dest="source_set",
                   choices=[s.value for s in SourceSet])
    p.add_argument("--alpha", type=float)
    p.add_argument("--challenger-rank", dest="challenger_rank", type=int)
    p.add_argument("--unit-reliability", dest="unit_reliability",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--residual-inputs", dest="residual_inputs",
                   help="JSONL sidecar keyed by (question_id, rank)")
    p.add_argument("--residual-scale", dest="residual_scale", type=float)
    p.add_argument("--residual-clip", dest="residual_clip", type=float)
    p.add_argument("--permission", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="join predictions with gold labels")
    add_common(p)
    p.add_argument("--pool", required=True)
    p.add_argument("--diagnostics", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--format", required=True)
    p.add_argument("--oracle-ks", dest="oracle_ks", default="2,3,5")
    p.add_argument("--normalize-gold", dest="normalize_gold",
                   action=argparse.BooleanOptionalAction, default=None,
                   help="canonicalize gold labels before comparing")
    p.add_argument("--label", help="run label echoed into the summary")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render summaries as a table plus CSV")
    add_common(p)
    p.add_argument("--summary", action="append", required=True,
                   help="summary.json produced by evaluate (repeatable)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("collect", help="gather pools from a live endpoint")
    add_common(p)
    p.add_argument("--questions", required=True)
    p.add_argument("--format", required=True)
    p.add_argument("--base-url", dest="base_url", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--raw-solves", dest="raw_solves", type=int)
    p.add_argument("--framed-solves", dest="framed_solves", type=int)
    p.add_argument("--panel-trials", dest="panel_trials", type=int)
    p.add_argument("--guided-trials", dest="guided_trials", type=int)
    p.add_argument("--greedy", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-parallel", dest="max_parallel", type=int)
    p.add_argument("--retry-budget", dest="retry_budget", type=int)
    p.add_argument("--templates", help="directory overriding the packaged templates")
    p.add_argument("--transcript", action=argparse.BooleanOptionalAction, default=False,
                   help="write the request/response transcript")
    p.set_defaults(func=cmd_collect)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        name = exc.filename or exc
        print(f"error: missing input file: {name}", file=sys.stderr)
        return 1
    except (
        ArtifactIOError,
        MalformedLineError,
        SchemaError,
        EndpointAuthError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
