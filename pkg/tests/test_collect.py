from __future__ import annotations

import pytest

from overrule.basin import Source, build_basins
from overrule.collect import (
    EndpointAuthError,
    EndpointConfig,
    PromptPlan,
    Question,
    _derive_seed,
    collect_pool,
    describe_basins,
    load_template,
)
from overrule.evidence import assign_evidence, reliability_top2
from overrule.normalize import TaskFormat

from mock_endpoint import MockEndpoint

FMT = TaskFormat.NUMERIC


def endpoint_cfg(url: str, **kwargs) -> EndpointConfig:
    base = dict(base_url=url, model_name="mock-model", timeout=10.0,
                max_parallel=4, retry_budget=1)
    base.update(kwargs)
    return EndpointConfig(**base)


def seed(qid: str, source: str, trial: int) -> int:
    return _derive_seed(qid, source, trial)


def split_script(qid: str) -> dict[int, str]:
    """16 raw votes for 7 and 8 for 9, evidence favoring the challenger."""
    script: dict[int, str] = {}
    for t in range(24):
        script[seed(qid, "raw", t)] = "#### 7" if t < 16 else "#### 9"
    script[seed(qid, "frame", 1)] = "Total season games interpretation."
    script[seed(qid, "frame", 2)] = "Per-month games interpretation."
    for t in range(24):
        if t < 13:
            script[seed(qid, "framed", t)] = "solve again\n#### 9"
        elif t < 21:
            script[seed(qid, "framed", t)] = "solve again\n#### 7"
        else:
            script[seed(qid, "framed", t)] = "cannot settle on an answer"
    for t in range(6):
        script[seed(qid, "panel_original", t)] = "#### 9" if t < 5 else "#### 7"
        script[seed(qid, "panel_swapped", t)] = "#### 9" if t < 4 else "#### 7"
    for t in range(4):
        script[seed(qid, "guided", t)] = "#### 9"
    return script


QUESTIONS = [
    Question("q1", "How many games in the season?"),
    Question("q2", "How many marbles remain?"),
]


class TestAccounting:
    def test_planned_counts_and_exact_ledger(self):
        script = split_script("q1")
        script.update(split_script("q2"))
        with MockEndpoint(script) as mock:
            pools, frames, transcript = collect_pool(
                QUESTIONS, FMT, endpoint_cfg(mock.base_url), PromptPlan()
            )
        for qid in ("q1", "q2"):
            cands = pools[qid]
            by_source = {
                src: [c for c in cands if c.source is src] for src in Source
            }
            assert len(by_source[Source.RAW]) == 24
            assert len(by_source[Source.FRAMED]) == 24
            assert len(by_source[Source.PANEL_ORIGINAL]) == 6
            assert len(by_source[Source.PANEL_SWAPPED]) == 6
            assert len(by_source[Source.GUIDED]) == 4
            assert len(by_source[Source.GREEDY]) == 0

            basins = build_basins(cands, FMT, qid)
            assert [(b.answer, b.size) for b in basins.basins] == [("7", 16), ("9", 8)]

            aux = [c for c in cands if c.source not in (Source.RAW, Source.GREEDY)]
            ledger = assign_evidence(aux, basins, FMT)
            assert ledger.count(Source.FRAMED, "9") == 13
            assert ledger.count(Source.FRAMED, "7") == 8
            assert ledger.attempted(Source.FRAMED) == 24
            assert ledger.count(Source.PANEL_ORIGINAL, "9") == 5
            assert ledger.count(Source.PANEL_SWAPPED, "9") == 4
            assert ledger.attempted(Source.PANEL_ORIGINAL) == 6
            assert ledger.attempted(Source.PANEL_SWAPPED) == 6
            assert ledger.count(Source.GUIDED, "9") == 4
            assert frames[qid][1] and frames[qid][2]
        assert len(transcript) == 2 * (24 + 2 + 24 + 12 + 4)

    def test_invalid_outputs_keep_attempted_denominators(self):
        qid = "q1"
        script = split_script(qid)
        # three framed calls fail at transport level beyond the retry budget
        for t in (2, 9, 17):
            script[seed(qid, "framed", t)] = 500
        with MockEndpoint(script) as mock:
            pools, _, transcript = collect_pool(
                [QUESTIONS[0]], FMT, endpoint_cfg(mock.base_url), PromptPlan()
            )
        framed = [c for c in pools[qid] if c.source is Source.FRAMED]
        assert len(framed) == 24  # attempted denominator intact
        invalid = [c for c in framed if not c.answer.valid]
        assert {c.index for c in invalid} >= {2, 9, 17}
        errors = [r for r in transcript if r["error"] is not None]
        assert any(r["source"] == "framed" and r["trial"] == 2 for r in errors)

    def test_greedy_anchor_collected_but_not_voting(self):
        qid = "q1"
        script = split_script(qid)
        script[seed(qid, "greedy", 0)] = "#### 7"
        with MockEndpoint(script) as mock:
            pools, _, _ = collect_pool(
                [QUESTIONS[0]], FMT, endpoint_cfg(mock.base_url),
                PromptPlan(greedy_solve=True),
            )
        greedy = [c for c in pools[qid] if c.source is Source.GREEDY]
        assert len(greedy) == 1 and greedy[0].temperature == 0.0
        basins = build_basins(pools[qid], FMT, qid)
        assert basins.raw_attempted == 24

    def test_retry_within_budget_recovers(self):
        qid = "q1"
        script = split_script(qid)
        script[seed(qid, "raw", 0)] = [500, "#### 7"]
        with MockEndpoint(script) as mock:
            pools, _, _ = collect_pool(
                [QUESTIONS[0]], FMT, endpoint_cfg(mock.base_url, retry_budget=1),
                PromptPlan(panel_trials=0, guided_trials=0, framed_solves=0),
            )
        raw0 = [c for c in pools[qid] if c.source is Source.RAW and c.index == 0]
        assert raw0[0].answer.valid and raw0[0].answer.canonical == "7"

    def test_concurrent_arrival_order_changes_nothing(self):
        script = split_script("q1")
        script.update(split_script("q2"))
        runs = []
        for parallel in (1, 6):
            with MockEndpoint(dict(script)) as mock:
                pools, _, _ = collect_pool(
                    QUESTIONS, FMT, endpoint_cfg(mock.base_url, max_parallel=parallel),
                    PromptPlan(),
                )
            runs.append(pools)
        assert runs[0] == runs[1]


class TestFrames:
    def test_describe_basins_two_frames(self):
        qid = "q1"
        with MockEndpoint(split_script(qid)) as mock:
            pools, _, _ = collect_pool(
                [QUESTIONS[0]], FMT, endpoint_cfg(mock.base_url),
                PromptPlan(framed_solves=0, panel_trials=0, guided_trials=0),
            )
            basins = build_basins(pools[qid], FMT, qid)
            frames = describe_basins(
                basins, endpoint_cfg(mock.base_url), QUESTIONS[0].text, PromptPlan()
            )
        assert frames[1] == "Total season games interpretation."
        assert frames[2] == "Per-month games interpretation."

    def test_single_basin_needs_no_frames(self):
        qid = "q1"
        with MockEndpoint(default_text="#### 7") as mock:
            pools, frames, _ = collect_pool(
                [QUESTIONS[0]], FMT, endpoint_cfg(mock.base_url), PromptPlan()
            )
            basins = build_basins(pools[qid], FMT, qid)
            assert basins.m == 1
            assert qid not in frames
            with pytest.raises(ValueError, match="no challenger"):
                describe_basins(
                    basins, endpoint_cfg(mock.base_url), QUESTIONS[0].text, PromptPlan()
                )

    def test_failed_frame_skips_panel_and_guided(self):
        qid = "q1"
        script = split_script(qid)
        script[seed(qid, "frame", 2)] = 500  # challenger frame unavailable
        with MockEndpoint(script) as mock:
            pools, frames, _ = collect_pool(
                [QUESTIONS[0]], FMT, endpoint_cfg(mock.base_url), PromptPlan()
            )
        assert frames[qid][2] == ""
        sources = {c.source for c in pools[qid]}
        assert Source.PANEL_ORIGINAL not in sources
        assert Source.GUIDED not in sources
        assert Source.FRAMED in sources  # framed solves need no frames
        basins = build_basins(pools[qid], FMT, qid)
        aux = [c for c in pools[qid] if c.source not in (Source.RAW, Source.GREEDY)]
        rel = reliability_top2(assign_evidence(aux, basins, FMT), basins)
        assert rel.rho_p == 0.0 and rel.r_g == 0.0 and rel.r_f > 0


class TestEndpointBehavior:
    def test_auth_failure_aborts(self, monkeypatch):
        monkeypatch.delenv("OVERRULE_API_KEY", raising=False)
        monkeypatch.delenv("OPENAI_API_KEY", raising=False)
        with MockEndpoint(require_bearer="sekrit") as mock:
            with pytest.raises(EndpointAuthError, match="401"):
                collect_pool(
                    [QUESTIONS[0]], FMT, endpoint_cfg(mock.base_url), PromptPlan()
                )

    def test_api_key_sent_as_bearer(self):
        with MockEndpoint(require_bearer="sekrit", default_text="#### 4") as mock:
            pools, _, _ = collect_pool(
                [QUESTIONS[0]], FMT,
                endpoint_cfg(mock.base_url, api_key="sekrit"),
                PromptPlan(framed_solves=0, panel_trials=0, guided_trials=0),
            )
        assert all(c.answer.canonical == "4" for c in pools["q1"])

    def test_api_key_from_environment(self, monkeypatch):
        monkeypatch.setenv("OVERRULE_API_KEY", "sekrit")
        with MockEndpoint(require_bearer="sekrit", default_text="#### 4") as mock:
            pools, _, _ = collect_pool(
                [QUESTIONS[0]], FMT, endpoint_cfg(mock.base_url),
                PromptPlan(raw_solves=2, framed_solves=0, panel_trials=0, guided_trials=0),
            )
        assert len(pools["q1"]) == 2

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EndpointConfig(base_url="x", model_name="m", max_parallel=0)
        with pytest.raises(ValueError):
            EndpointConfig(base_url="x", model_name="m", retry_budget=-1)


class TestDownstreamInterchangeability:
    def test_collected_pools_feed_the_offline_pipeline(self, tmp_path):
        # a collected pool written out must be indistinguishable from a
        # simulated one for cluster/score/evaluate
        from overrule import artifacts
        from overrule.cli import main as cli_main

        script = split_script("q1")
        with MockEndpoint(script) as mock:
            pools, _, _ = collect_pool(
                [QUESTIONS[0]], FMT, endpoint_cfg(mock.base_url), PromptPlan()
            )
        base_rows, ev_rows = [], []
        for qid, cands in pools.items():
            for c in cands:
                row = artifacts.pool_row(qid, c)
                if c.source in (Source.RAW, Source.GREEDY):
                    base_rows.append(row)
                else:
                    ev_rows.append(row)
        artifacts.write_jsonl(base_rows, tmp_path / "pool.jsonl", artifacts.POOL_SCHEMA)
        artifacts.write_jsonl(ev_rows, tmp_path / "ev.jsonl", artifacts.POOL_SCHEMA)
        artifacts.write_jsonl(
            [{"question_id": "q1", "answer": "9"}],
            tmp_path / "gold.jsonl", artifacts.GOLD_SCHEMA,
        )
        assert cli_main([
            "cluster", "--pool", str(tmp_path / "pool.jsonl"),
            "--format", "numeric", "--output-dir", str(tmp_path / "c"),
        ]) == 0
        assert cli_main([
            "score", "--pool", str(tmp_path / "pool.jsonl"),
            "--evidence", str(tmp_path / "ev.jsonl"),
            "--format", "numeric", "--output-dir", str(tmp_path / "s"),
        ]) == 0
        assert cli_main([
            "evaluate", "--pool", str(tmp_path / "pool.jsonl"),
            "--diagnostics", str(tmp_path / "s" / artifacts.DELTA_DIAGNOSTICS),
            "--gold", str(tmp_path / "gold.jsonl"),
            "--format", "numeric", "--output-dir", str(tmp_path / "e"),
        ]) == 0
        summary = artifacts.read_json(tmp_path / "e" / artifacts.SUMMARY)
        assert summary["n"] == 1
        # evidence favored the correct challenger: 13v8 framed, 9v2 panel, 4v0 guided
        assert summary["recovered"] == 1


class TestTemplates:
    def test_packaged_templates_resolve_placeholders(self):
        tpl = load_template("panel")
        text = tpl.substitute(
            question="Q?", frame_1="F1", frame_2="F2", answer_instruction="I"
        )
        for token in ("Q?", "F1", "F2", "I"):
            assert token in text

    def test_template_dir_override(self, tmp_path):
        (tmp_path / "raw.txt").write_text("custom $question / $answer_instruction")
        tpl = load_template("raw", tmp_path)
        assert tpl.substitute(question="Q", answer_instruction="A") == "custom Q / A"

    def test_unknown_template_rejected(self):
        with pytest.raises(ValueError):
            load_template("mystery")
