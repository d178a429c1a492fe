"""Chat backends: scripted transcripts, OpenAI-compatible HTTP, and disabled."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Protocol


class BackendError(RuntimeError):
    """Transient or protocol failure; callers may retry."""


class BackendUnavailable(BackendError):
    """No backend present; callers degrade to mechanical behavior, no retries."""


class ChatBackend(Protocol):
    supports_structured_output: bool
    model_label: str

    def complete(self, messages: list[dict], temperature: float = 0.0) -> str: ...


def request_hash(messages: list[dict], temperature: float) -> str:
    doc = json.dumps({"messages": messages, "temperature": temperature}, sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()


class ScriptedBackend:
    """Replays canned responses from a transcript.

    The transcript is a JSON document {"responses": [...]} consumed in call
    order, optionally with {"by_hash": {request-hash: response}} entries that
    take precedence without advancing the ordinal cursor. A bare JSON list is
    accepted as shorthand for {"responses": [...]}.
    """

    supports_structured_output = True
    model_label = "scripted"

    def __init__(self, transcript: dict | list | str | Path):
        if isinstance(transcript, (str, Path)):
            with open(transcript, encoding="utf-8") as f:
                transcript = json.load(f)
        if isinstance(transcript, list):
            transcript = {"responses": transcript}
        self.responses: list[str] = list(transcript.get("responses", []))
        self.by_hash: dict[str, str] = dict(transcript.get("by_hash", {}))
        self.cursor = 0
        self.calls: list[dict] = []

    def complete(self, messages: list[dict], temperature: float = 0.0) -> str:
        key = request_hash(messages, temperature)
        self.calls.append({"hash": key, "messages": messages, "temperature": temperature})
        if key in self.by_hash:
            return self.by_hash[key]
        if self.cursor >= len(self.responses):
            raise BackendError(
                f"transcript exhausted: call {self.cursor + 1} has no scripted response"
            )
        reply = self.responses[self.cursor]
        self.cursor += 1
        return reply


class DisabledBackend:
    """Always unavailable; the reasoning loop degrades to pure BO."""

    supports_structured_output = False
    model_label = "disabled"

    def complete(self, messages: list[dict], temperature: float = 0.0) -> str:
        raise BackendUnavailable("chat backend disabled")


ENV_URL = "REASONBO_BACKEND_URL"
ENV_MODEL = "REASONBO_BACKEND_MODEL"
ENV_KEY = "REASONBO_BACKEND_KEY"


class HttpChatBackend:
    """OpenAI-compatible chat-completions client."""

    supports_structured_output = True

    def __init__(self, base_url: str, model: str, api_key: str = "", timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.model_label = model

    @classmethod
    def from_env(cls) -> "HttpChatBackend":
        url = os.environ.get(ENV_URL)
        if not url:
            raise BackendUnavailable(f"{ENV_URL} not set")
        return cls(
            base_url=url,
            model=os.environ.get(ENV_MODEL, "default"),
            api_key=os.environ.get(ENV_KEY, ""),
        )

    def complete(self, messages: list[dict], temperature: float = 0.0) -> str:
        import httpx

        headers = {"content-type": "application/json"}
        if self.api_key:
            headers["authorization"] = f"Bearer {self.api_key}"
        body = {"model": self.model, "messages": messages, "temperature": temperature}
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                json=body, headers=headers, timeout=self.timeout,
            )
        except httpx.HTTPError as exc:
            raise BackendError(f"backend request failed: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"backend returned HTTP {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendError(f"malformed completion payload: {exc}") from exc
