"""Append-only event log: persistence, replay, clocks, gap detection."""

from __future__ import annotations

import json

import pytest

from reasonbo.events import (
    EVENT_KINDS,
    CampaignEvent,
    EventLog,
    LogicalClock,
    WallClock,
    load_events,
)


def test_append_assigns_gapless_sequence(tmp_path):
    log = EventLog(tmp_path / "ev.jsonl", LogicalClock())
    e1 = log.append("created", {"a": 1})
    e2 = log.append("trial-proposed", {"b": 2})
    assert (e1.seq, e2.seq) == (1, 2)
    assert [e.kind for e in log.events] == ["created", "trial-proposed"]


def test_unknown_kind_rejected(tmp_path):
    log = EventLog(tmp_path / "ev.jsonl")
    with pytest.raises(ValueError):
        log.append("reticulated", {})


def test_logical_clock_ticks_one_second_from_fixed_epoch():
    clock = LogicalClock()
    assert clock.next_timestamp() == "2000-01-01T00:00:00+00:00"
    assert clock.next_timestamp() == "2000-01-01T00:00:01+00:00"


def test_wall_clock_is_utc_isoformat():
    ts = WallClock().next_timestamp()
    assert "T" in ts and ts.endswith("+00:00")


def test_reload_continues_sequence(tmp_path):
    path = tmp_path / "ev.jsonl"
    log = EventLog(path, LogicalClock())
    log.append("created", {})
    log.append("trial-proposed", {"t": "t000-0"})

    resumed = EventLog(path, LogicalClock())
    assert len(resumed.events) == 2
    e3 = resumed.append("observation-recorded", {"v": 1.0})
    assert e3.seq == 3
    assert len(load_events(path)) == 3


def test_load_events_detects_gaps(tmp_path):
    path = tmp_path / "ev.jsonl"
    rows = [
        {"seq": 1, "kind": "created", "payload": {}, "timestamp": "t"},
        {"seq": 3, "kind": "finished", "payload": {}, "timestamp": "t"},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    with pytest.raises(ValueError, match="gap"):
        load_events(path)


def test_log_lines_are_json_with_sorted_keys(tmp_path):
    path = tmp_path / "ev.jsonl"
    EventLog(path, LogicalClock()).append("created", {"z": 1, "a": 2})
    line = path.read_text().strip()
    assert line == json.dumps(json.loads(line), sort_keys=True)


def test_in_memory_log_needs_no_path():
    log = EventLog()
    event = log.append("created", {})
    assert isinstance(event, CampaignEvent)
    assert log.path is None


def test_event_kind_vocabulary_is_stable():
    assert set(EVENT_KINDS) == {
        "created", "trial-proposed", "observation-recorded",
        "insights", "note-stored", "finished",
    }
