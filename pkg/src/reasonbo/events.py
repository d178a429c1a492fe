"""Append-only campaign event log with pluggable timestamp source."""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Protocol

EVENT_KINDS = (
    "created",
    "trial-proposed",
    "observation-recorded",
    "insights",
    "note-stored",
    "finished",
)


class Clock(Protocol):
    def next_timestamp(self) -> str: ...


class WallClock:
    def next_timestamp(self) -> str:
        return datetime.now(timezone.utc).isoformat()


class LogicalClock:
    """Fixed epoch advanced one second per event; batch runs replay identically."""

    EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)

    def __init__(self):
        self.ticks = 0

    def next_timestamp(self) -> str:
        ts = self.EPOCH + timedelta(seconds=self.ticks)
        self.ticks += 1
        return ts.isoformat()


@dataclass(frozen=True)
class CampaignEvent:
    seq: int
    kind: str
    payload: dict
    timestamp: str


class EventLog:
    """Gapless sequence of immutable events, optionally mirrored to JSONL."""

    def __init__(self, path: str | Path | None = None, clock: Clock | None = None):
        self.path = Path(path) if path is not None else None
        self.clock = clock if clock is not None else WallClock()
        self.events: list[CampaignEvent] = []
        if self.path is not None and self.path.exists():
            self.events = load_events(self.path)

    def append(self, kind: str, payload: dict) -> CampaignEvent:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind: {kind}")
        event = CampaignEvent(
            seq=len(self.events) + 1,
            kind=kind,
            payload=payload,
            timestamp=self.clock.next_timestamp(),
        )
        if self.path is not None:
            line = json.dumps(
                {"seq": event.seq, "kind": event.kind,
                 "payload": event.payload, "timestamp": event.timestamp},
                sort_keys=True,
            )
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
                f.flush()
        self.events.append(event)
        return event


def load_events(path: str | Path) -> list[CampaignEvent]:
    events: list[CampaignEvent] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            event = CampaignEvent(
                seq=int(doc["seq"]),
                kind=doc["kind"],
                payload=doc["payload"],
                timestamp=doc["timestamp"],
            )
            if event.seq != len(events) + 1:
                raise ValueError(
                    f"event log has a gap: expected seq {len(events) + 1}, got {event.seq}"
                )
            events.append(event)
    return events
