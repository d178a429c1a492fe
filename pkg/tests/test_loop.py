"""Campaign loop: reply parsing, scripted replay, degradation, fallbacks."""

from __future__ import annotations

import json
from importlib import resources

import pytest

from conftest import make_mixed_space
from reasonbo.backends import DisabledBackend, ScriptedBackend
from reasonbo.core import (
    Budget,
    CampaignState,
    ExperimentCompass,
    Hypothesis,
    InsightsObject,
    SpaceValidationError,
    load_compass,
)
from reasonbo.events import EventLog, LogicalClock
from reasonbo.knowledge import HashedEmbedder, KnowledgeStore
from reasonbo.loop import (
    CampaignDriver,
    EmptyCampaignError,
    InsightsParseError,
    confidence_table,
    extract_entities,
    parse_index_selection,
    parse_insights_json,
    run_campaign,
)
from reasonbo.runners import resolve_evaluator, run_seed


def _mixed_compass(budget_rounds: int = 2) -> ExperimentCompass:
    return ExperimentCompass(
        title="Mixed screening",
        description="Tune temperature, stoichiometry, catalyst.",
        space=make_mixed_space(),
        budget=Budget(rounds=budget_rounds, candidates_per_round=3, bo_pool_size=5),
    )


def _coupling_compass() -> ExperimentCompass:
    path = resources.files("reasonbo") / "compasses" / "coupling.json"
    return load_compass(str(path))


def _insights_reply(n_candidates: int = 3) -> str:
    cands = [
        {"temperature": 40.0 + 10.0 * i, "equivalents": 1.5, "catalyst": "Pd-A"}
        for i in range(n_candidates)
    ]
    return json.dumps({
        "comments": "warm start near known good region",
        "keywords": ["temperature", "catalyst"],
        "hypotheses": [
            {"id": "h1", "statement": "Pd-A outperforms Ni-C",
             "confidence": 0.6, "status": "proposed"},
        ],
        "candidates": cands,
    })


def _notes_reply() -> str:
    return (
        "Key findings:\nmid temperatures look strong\n"
        "Parameter relationships:\ncatalyst dominates\n"
        "Optimization principles:\nexploit around 60C\n"
        "General notes:\nnothing anomalous\n"
        "Created knowledge triples:\n(Pd-A, Boosts, yield)\n"
    )


# ---------------------------------------------------------------------------
# reply parsing


def test_parse_insights_full_document():
    compass = _mixed_compass()
    insights, audit = parse_insights_json(_insights_reply(), compass)
    assert audit == []
    assert insights.comments.startswith("warm start")
    assert insights.keywords == ("temperature", "catalyst")
    assert insights.hypotheses[0] == Hypothesis(
        id="h1", statement="Pd-A outperforms Ni-C", confidence=0.6, status="proposed"
    )
    assert len(insights.candidates) == 3
    assert insights.candidates[0].values["catalyst"] == "Pd-A"


def test_parse_insights_json_embedded_in_prose():
    compass = _mixed_compass()
    text = "Sure! Here is my analysis:\n" + _insights_reply() + "\nHope that helps."
    insights, _ = parse_insights_json(text, compass)
    assert len(insights.candidates) == 3


@pytest.mark.parametrize("doc", [
    "no json here at all",
    json.dumps({"comments": 7}),
    json.dumps({"keywords": "temperature"}),
    json.dumps({"hypotheses": {"id": "h1"}}),
    json.dumps({"candidates": "none"}),
    json.dumps({"keywords": [],
                "hypotheses": [{"id": "h1", "statement": "s", "confidence": 0.5}]}),
])
def test_parse_insights_structural_errors(doc):
    with pytest.raises(InsightsParseError):
        parse_insights_json(doc, _mixed_compass())


def test_parse_insights_drops_invalid_items_with_audit():
    compass = _mixed_compass()
    doc = json.dumps({
        "comments": "c",
        "keywords": ["k"],
        "hypotheses": [
            {"id": "h1", "statement": "fine", "confidence": 0.4, "status": "banana"},
            {"id": "h2", "confidence": 0.4},
            {"id": "h3", "statement": "too sure", "confidence": 1.5},
            {"id": "h4", "statement": "text conf", "confidence": "high"},
        ],
        "candidates": [
            {"temperature": 50.0, "equivalents": 1.5, "catalyst": "Pd-A"},
            {"temperature": 500.0, "equivalents": 1.5, "catalyst": "Pd-A"},
            {"temperature": 50.0, "equivalents": 1.5, "catalyst": "Cu-X"},
            "not an object",
        ],
    })
    insights, audit = parse_insights_json(doc, compass)
    assert [h.id for h in insights.hypotheses] == ["h1"]
    assert insights.hypotheses[0].status == "proposed"  # unknown status normalized
    assert len(insights.candidates) == 1
    assert len(audit) == 6


def test_parse_index_selection():
    assert parse_index_selection("[0, 2, 4]", 5, 3) == [0, 2, 4]
    assert parse_index_selection("I pick [1,0] because...", 5, 2) == [1, 0]
    assert parse_index_selection("none", 5, 3) is None
    assert parse_index_selection("[0, 1]", 5, 3) is None  # wrong count
    assert parse_index_selection("[0, 0, 1]", 5, 3) is None  # duplicates
    assert parse_index_selection("[0, 2, 9]", 5, 3) is None  # out of range
    assert parse_index_selection("[0, -1, 2]", 5, 3) is None
    assert parse_index_selection("[]", 5, 0) == []


def test_extract_entities_case_insensitive():
    compass = _mixed_compass()
    mentions = extract_entities(
        "The TEMPERATURE sweep suggests pd-a beats Ni-C.", compass
    )
    found = {(m.term, m.role) for m in mentions}
    assert ("temperature", "name") in found
    assert ("Pd-A", "choice") in found
    assert ("Ni-C", "choice") in found


def test_confidence_table_tracks_trajectories():
    compass = _mixed_compass()
    state = CampaignState(compass=compass).with_updates(insight_history=(
        InsightsObject(comments="", keywords=("k",), hypotheses=(
            Hypothesis(id="h1", statement="s1", confidence=0.5, status="proposed"),
        ), candidates=()),
        InsightsObject(comments="", keywords=("k",), hypotheses=(
            Hypothesis(id="h1", statement="s1", confidence=0.8, status="supported"),
            Hypothesis(id="h2", statement="s2", confidence=0.3, status="proposed"),
        ), candidates=()),
    ))
    table = confidence_table(state)
    lines = table.splitlines()
    assert lines[0].startswith("| Hypothesis |")
    assert "| h1 | s1 | 0.50, 0.80 | supported |" in lines
    assert "| h2 | s2 | 0.30 | proposed |" in lines
    assert confidence_table(CampaignState(compass=compass)) == "(no hypotheses were recorded)"


# ---------------------------------------------------------------------------
# scripted replay


def _transcript_path() -> str:
    return str(resources.files("reasonbo") / "fixtures" / "coupling_transcript.json")


def _run_scripted(log_path) -> tuple:
    compass = _coupling_compass()
    backend = ScriptedBackend(_transcript_path())
    log = EventLog(path=log_path, clock=LogicalClock())
    result = run_campaign(
        compass, backend, evaluator=resolve_evaluator(compass), seed=0,
        store=KnowledgeStore(HashedEmbedder()), event_log=log,
    )
    return result, backend


def test_scripted_campaign_full_replay(tmp_path):
    result, backend = _run_scripted(tmp_path / "a.jsonl")
    assert backend.cursor == len(backend.responses) == 32
    assert result.state.status == "finished"
    assert len(result.state.observations) == 30
    best = result.state.best_observed()
    assert best[1].value == 85.5
    assert "85.5" in result.conclusion
    # no parse failures, no dropped candidates, no rejected triples
    assert [a for a in result.audit if "parse failed" in a] == []
    assert [a for a in result.audit if "dropped" in a] == []


def test_scripted_campaign_is_byte_identical(tmp_path):
    _run_scripted(tmp_path / "a.jsonl")
    _run_scripted(tmp_path / "b.jsonl")
    a = (tmp_path / "a.jsonl").read_bytes()
    b = (tmp_path / "b.jsonl").read_bytes()
    assert a == b
    kinds = [json.loads(line)["kind"] for line in a.decode().splitlines()]
    assert kinds[0] == "created"
    assert kinds[-1] == "finished"
    for expected in ("trial-proposed", "observation-recorded", "insights", "note-stored"):
        assert expected in kinds


def test_scripted_campaign_populates_knowledge(tmp_path):
    result, _ = _run_scripted(tmp_path / "a.jsonl")
    rounds = result.rounds
    # compass notes precede round 1, reasoning notes land from round 1 on
    assert rounds[1].note is not None
    assert rounds[1].note.id == "n001"
    assert any(not r.retrieved.is_empty() for r in rounds[1:])
    assert all(r.insights is not None for r in rounds)


def test_degradation_identity_disabled_equals_vanilla():
    compass = _coupling_compass()
    a = run_seed("reasoning-bo", compass, seed=5, budget=12, backend=DisabledBackend())
    b = run_seed("vanilla-bo", compass, seed=5, budget=12)
    assert a.rows == b.rows
    assert a.batch_sizes == b.batch_sizes


# ---------------------------------------------------------------------------
# fallbacks and edge paths


def test_parse_retry_consumes_following_response():
    compass = _mixed_compass()
    backend = ScriptedBackend({"responses": [
        "overview text",
        _notes_reply(),
        "THIS IS NOT JSON",
        _insights_reply(),
        "summary text",
        "conclusion text",
    ]})
    result = run_campaign(
        compass, backend, evaluator=lambda p: float(p.values["temperature"]),
        seed=1, total_budget=3,
    )
    assert backend.cursor == 6
    assert any("parse failed" in a for a in result.audit)
    assert result.rounds[0].insights is not None
    assert len(result.state.observations) == 3
    # the retry's prompt carries the validation error back to the model
    retry_prompt = backend.calls[3]["messages"][1]["content"]
    assert "could not be used" in retry_prompt


def test_filter_valid_selection_sets_llm_origin():
    compass = _mixed_compass()
    backend = ScriptedBackend({"responses": [
        "overview text",
        _notes_reply(),
        _insights_reply(),
        "[2, 0, 4]",
        _notes_reply(),
        _insights_reply(),
        "summary text",
        "conclusion text",
    ]})
    result = run_campaign(
        compass, backend, evaluator=lambda p: float(p.values["temperature"]),
        seed=2, total_budget=6,
    )
    rec = result.rounds[1]
    assert [t.origin for t in rec.selected] == ["llm-selected"] * 3
    pool_keys = [p.key() for p in rec.pool.points]
    selected_keys = [t.point.key() for t in rec.selected]
    assert selected_keys == [pool_keys[2], pool_keys[0], pool_keys[4]]
    assert "selection fallback" not in rec.flags


def test_filter_fallback_on_unusable_reply():
    compass = _mixed_compass()
    backend = ScriptedBackend({"responses": [
        "overview text",
        _notes_reply(),
        _insights_reply(),
        "[99, 98, 97]",
        _notes_reply(),
        _insights_reply(),
        "summary text",
        "conclusion text",
    ]})
    result = run_campaign(
        compass, backend, evaluator=lambda p: float(p.values["temperature"]),
        seed=3, total_budget=6,
    )
    rec = result.rounds[1]
    assert "selection fallback" in rec.flags
    assert [t.origin for t in rec.selected] == ["bo-proposed"] * 3
    pool_keys = [p.key() for p in rec.pool.points]
    assert [t.point.key() for t in rec.selected] == pool_keys[:3]
    assert any("selection unparseable" in a for a in result.audit)


def test_disabled_backend_degrades_every_phase():
    compass = _mixed_compass()
    result = run_campaign(
        compass, DisabledBackend(),
        evaluator=lambda p: float(p.values["temperature"]),
        seed=4, total_budget=6,
    )
    assert result.state.status == "finished"
    assert len(result.state.observations) == 6
    assert all(r.insights is None for r in result.rounds)
    assert all(r.note is None for r in result.rounds)
    assert any("random top-up" in f for f in result.rounds[0].flags)
    assert any("backend unavailable" in a for a in result.audit)
    assert result.summary == "(narrative unavailable)"
    assert "1. Key outcomes" in result.conclusion
    # round-1 selection falls back to the acquisition ranking
    assert [t.origin for t in result.rounds[1].selected] == ["bo-proposed"] * 3


def test_evaluator_failure_skips_observation_and_continues():
    compass = _mixed_compass()
    calls = {"n": 0}

    def flaky(point):
        calls["n"] += 1
        if calls["n"] == 1:
            raise RuntimeError("instrument offline")
        return float(point.values["temperature"])

    result = run_campaign(
        compass, DisabledBackend(), evaluator=flaky, seed=5, total_budget=6,
    )
    assert result.state.status == "finished"
    assert len(result.state.trials) == 6
    assert len(result.state.observations) == 5
    assert any("evaluation failed" in a for a in result.audit)


def test_budget_truncates_final_round():
    compass = _mixed_compass()
    result = run_campaign(
        compass, DisabledBackend(),
        evaluator=lambda p: float(p.values["temperature"]),
        seed=6, total_budget=4,
    )
    assert [len(r.selected) for r in result.rounds] == [3, 1]
    assert [t.id for t in result.rounds[1].selected] == ["t001-0"]
    assert len(result.state.observations) == 4


def test_driver_validates_compass_and_budget():
    broken = ExperimentCompass(
        title="bad", description="d",
        space=make_mixed_space(),
        budget=Budget(rounds=0, candidates_per_round=3, bo_pool_size=5),
    )
    with pytest.raises((SpaceValidationError, EmptyCampaignError)):
        CampaignDriver(broken, DisabledBackend(), evaluator=lambda p: 0.0, seed=0)
    with pytest.raises(EmptyCampaignError):
        CampaignDriver(
            _mixed_compass(), DisabledBackend(), evaluator=lambda p: 0.0,
            seed=0, total_budget=0,
        )
