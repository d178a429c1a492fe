"""Chat backend contracts: scripted replay, hash overrides, disabled mode."""

from __future__ import annotations

import json

import pytest

from reasonbo.backends import (
    BackendError,
    BackendUnavailable,
    DisabledBackend,
    HttpChatBackend,
    ScriptedBackend,
    request_hash,
)

MSGS = [{"role": "user", "content": "hello"}]


def test_scripted_consumes_in_call_order():
    backend = ScriptedBackend({"responses": ["a", "b", "c"]})
    assert backend.complete(MSGS) == "a"
    assert backend.complete(MSGS) == "b"
    assert backend.complete(MSGS) == "c"
    with pytest.raises(BackendError, match="exhausted"):
        backend.complete(MSGS)
    assert backend.cursor == 3
    assert len(backend.calls) == 4


def test_scripted_accepts_bare_list_and_path(tmp_path):
    assert ScriptedBackend(["x"]).complete(MSGS) == "x"
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"responses": ["from-file"]}), encoding="utf-8")
    assert ScriptedBackend(str(path)).complete(MSGS) == "from-file"


def test_by_hash_takes_precedence_without_advancing_cursor():
    key = request_hash(MSGS, 0.0)
    backend = ScriptedBackend({"responses": ["ordinal"], "by_hash": {key: "pinned"}})
    assert backend.complete(MSGS, temperature=0.0) == "pinned"
    assert backend.cursor == 0
    assert backend.complete(MSGS, temperature=0.5) == "ordinal"
    assert backend.cursor == 1


def test_request_hash_is_stable_and_sensitive():
    a = request_hash(MSGS, 0.0)
    assert a == request_hash([{"role": "user", "content": "hello"}], 0.0)
    assert a != request_hash(MSGS, 0.1)
    assert a != request_hash([{"role": "user", "content": "other"}], 0.0)


def test_disabled_backend_is_unavailable():
    with pytest.raises(BackendUnavailable):
        DisabledBackend().complete(MSGS)


def test_http_backend_from_env_requires_url(monkeypatch):
    monkeypatch.delenv("REASONBO_BACKEND_URL", raising=False)
    with pytest.raises(BackendUnavailable):
        HttpChatBackend.from_env()
    monkeypatch.setenv("REASONBO_BACKEND_URL", "http://localhost:9")
    monkeypatch.setenv("REASONBO_BACKEND_MODEL", "m1")
    backend = HttpChatBackend.from_env()
    assert backend.base_url == "http://localhost:9"
    assert backend.model_label == "m1"
