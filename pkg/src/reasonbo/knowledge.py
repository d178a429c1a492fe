"""Dual-channel knowledge store: triple graph plus brute-force vector index.

Notes are parsed from a five-section text layout (key findings, parameter
relationships, optimization principles, general notes, created knowledge
triples). Persistence is an append-only JSONL event log replayed on load;
embeddings are recomputed at replay time, so the log stays human-readable.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from reasonbo.core import SearchSpace

SECTION_FIELDS = {
    "key findings": "key_findings",
    "parameter relationships": "parameter_relationships",
    "optimization principles": "optimization_principles",
    "general notes": "general_notes",
    "created knowledge triples": "triples",
}

_HEADER_RE = re.compile(
    r"^\s*(key findings|parameter relationships|optimization principles|"
    r"general notes|created knowledge triples)\s*:\s*(.*)$",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class KnowledgeTriple:
    subject: str
    relation: str
    object: str
    provenance: str = ""

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.subject, self.relation, self.object)

    def render(self) -> str:
        return f"({self.subject}, {self.relation}, {self.object})"


@dataclass(frozen=True)
class NoteRecord:
    id: str
    source: str  # compass | reasoning | manual
    key_findings: str = ""
    parameter_relationships: str = ""
    optimization_principles: str = ""
    general_notes: str = ""
    triples: tuple[KnowledgeTriple, ...] = ()
    round: int | None = None

    def sections(self) -> list[tuple[str, str]]:
        named = [
            ("key_findings", self.key_findings),
            ("parameter_relationships", self.parameter_relationships),
            ("optimization_principles", self.optimization_principles),
            ("general_notes", self.general_notes),
        ]
        return [(name, text) for name, text in named if text.strip()]


@dataclass(frozen=True)
class VectorEntry:
    id: str
    text: str
    embedding: np.ndarray
    norm: float


@dataclass(frozen=True)
class QueryResult:
    triples: tuple[KnowledgeTriple, ...] = ()
    passages: tuple[tuple[str, float], ...] = ()

    def is_empty(self) -> bool:
        return not self.triples and not self.passages


@dataclass(frozen=True)
class VerificationReport:
    accepted: tuple[KnowledgeTriple, ...]
    rejected: tuple[tuple[KnowledgeTriple, str], ...]


# ---------------------------------------------------------------------------
# parsing

def parse_triple_line(line: str) -> KnowledgeTriple | None:
    """Parse one "(subject, Relation, object)" line; None when malformed."""
    s = line.strip()
    if not (s.startswith("(") and s.endswith(")")):
        return None
    parts = [p.strip() for p in s[1:-1].split(",")]
    if len(parts) != 3 or not all(parts):
        return None
    subject, relation, obj = parts
    if any(ch.isspace() for ch in relation):
        return None
    return KnowledgeTriple(subject=subject, relation=relation, object=obj)


def parse_notes(
    text: str, note_id: str, source: str = "reasoning", round: int | None = None
) -> tuple[NoteRecord, list[str]]:
    """Split sectioned notes text into a NoteRecord plus an audit trail.

    Unknown leading prose and malformed triple lines are recorded in the audit
    list rather than raised; text with no recognizable headers lands whole in
    general_notes.
    """
    audit: list[str] = []
    buckets: dict[str, list[str]] = {v: [] for v in SECTION_FIELDS.values()}
    current: str | None = None
    saw_header = False
    for line in text.splitlines():
        m = _HEADER_RE.match(line)
        if m:
            current = SECTION_FIELDS[m.group(1).lower()]
            saw_header = True
            rest = m.group(2).strip()
            if rest:
                buckets[current].append(rest)
            continue
        if current is None:
            if line.strip():
                audit.append(f"unsectioned line ignored: {line.strip()[:80]}")
            continue
        buckets[current].append(line.rstrip())

    triples: list[KnowledgeTriple] = []
    for raw in buckets["triples"]:
        if not raw.strip():
            continue
        t = parse_triple_line(raw)
        if t is None:
            audit.append(f"malformed triple dropped: {raw.strip()[:80]}")
        else:
            triples.append(KnowledgeTriple(*t.as_tuple(), provenance=note_id))

    def joined(key: str) -> str:
        return "\n".join(buckets[key]).strip()

    general = joined("general_notes")
    if not saw_header:
        general = text.strip()
        audit.append("no section headers found; raw text stored in general notes")

    return NoteRecord(
        id=note_id,
        source=source,
        key_findings=joined("key_findings"),
        parameter_relationships=joined("parameter_relationships"),
        optimization_principles=joined("optimization_principles"),
        general_notes=general,
        triples=tuple(triples),
        round=round,
    ), audit


# ---------------------------------------------------------------------------
# embedding

class HashedEmbedder:
    """Deterministic signed bag-of-words projection for tests and offline runs.

    Token buckets and signs come from sha256 over a seed-prefixed token, so
    vectors are stable across processes and platforms.
    """

    def __init__(self, dimension: int = 256, seed: int = 0):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self.seed = seed

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension)
        for token in re.findall(r"[a-z0-9]+", text.lower()):
            digest = hashlib.sha256(f"{self.seed}:{token}".encode()).digest()
            idx = int.from_bytes(digest[:8], "big") % self.dimension
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            vec[idx] += sign
        return vec


def cosine_similarity(a: np.ndarray, na: float, b: np.ndarray, nb: float) -> float:
    if na <= 0.0 or nb <= 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


# ---------------------------------------------------------------------------
# store

class StoreWriteError(OSError):
    pass


class KnowledgeStore:
    """Append-only store; reads are cheap, writes go through store_note."""

    def __init__(self, embedder: HashedEmbedder, path: str | Path | None = None):
        self.embedder = embedder
        self.path = Path(path) if path is not None else None
        self.entries: list[VectorEntry] = []
        self.triples: list[KnowledgeTriple] = []
        self.notes: dict[str, NoteRecord] = {}
        if self.path is not None and self.path.exists():
            self._replay()

    def _replay(self) -> None:
        with open(self.path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                kind = event["kind"]
                if kind == "note-insert":
                    self._apply_note(event["note"])
                elif kind == "vector-insert":
                    self._apply_vector(event["id"], event["text"])
                elif kind == "triple-insert":
                    self._apply_triple(KnowledgeTriple(
                        subject=event["subject"],
                        relation=event["relation"],
                        object=event["object"],
                        provenance=event.get("provenance", ""),
                    ))

    def _apply_note(self, doc: dict) -> None:
        note = NoteRecord(
            id=doc["id"],
            source=doc["source"],
            key_findings=doc.get("key_findings", ""),
            parameter_relationships=doc.get("parameter_relationships", ""),
            optimization_principles=doc.get("optimization_principles", ""),
            general_notes=doc.get("general_notes", ""),
            triples=(),
            round=doc.get("round"),
        )
        self.notes[note.id] = note

    def _apply_vector(self, entry_id: str, text: str) -> None:
        emb = self.embedder.embed(text)
        self.entries.append(VectorEntry(
            id=entry_id, text=text, embedding=emb, norm=float(np.linalg.norm(emb))
        ))

    def _apply_triple(self, triple: KnowledgeTriple) -> None:
        self.triples.append(triple)

    def has_triple(self, triple: KnowledgeTriple) -> bool:
        key = triple.as_tuple()
        return any(t.as_tuple() == key for t in self.triples)


def _note_event(note: NoteRecord) -> dict:
    return {
        "kind": "note-insert",
        "note": {
            "id": note.id,
            "source": note.source,
            "key_findings": note.key_findings,
            "parameter_relationships": note.parameter_relationships,
            "optimization_principles": note.optimization_principles,
            "general_notes": note.general_notes,
            "round": note.round,
        },
    }


def store_note(
    store: KnowledgeStore,
    note: NoteRecord,
    accepted_triples: tuple[KnowledgeTriple, ...] | list[KnowledgeTriple],
) -> KnowledgeStore:
    """Insert a verified note: one vector entry per nonempty section, plus triples.

    The JSONL append happens before any in-memory mutation, so a failed write
    leaves the store untouched.
    """
    events: list[dict] = [_note_event(note)]
    section_items: list[tuple[str, str]] = []
    for name, text in note.sections():
        entry_id = f"{note.id}/{name}"
        section_items.append((entry_id, text))
        events.append({"kind": "vector-insert", "id": entry_id, "text": text})
    for t in accepted_triples:
        events.append({
            "kind": "triple-insert",
            "subject": t.subject,
            "relation": t.relation,
            "object": t.object,
            "provenance": t.provenance or note.id,
        })

    if store.path is not None:
        try:
            with open(store.path, "a", encoding="utf-8") as f:
                for event in events:
                    f.write(json.dumps(event, sort_keys=True) + "\n")
                f.flush()
        except OSError as exc:
            raise StoreWriteError(f"could not append to {store.path}: {exc}") from exc

    store.notes[note.id] = note
    for entry_id, text in section_items:
        store._apply_vector(entry_id, text)
    for t in accepted_triples:
        store._apply_triple(KnowledgeTriple(
            t.subject, t.relation, t.object, t.provenance or note.id
        ))
    return store


# ---------------------------------------------------------------------------
# verification

def _space_vocabulary(space: SearchSpace) -> list[str]:
    vocab: list[str] = []
    for p in space.parameters:
        vocab.append(p.name)
        for c in p.choices or ():
            vocab.append(c)
    return vocab


def _entity_matches(entity: str, vocab: list[str]) -> bool:
    e = entity.lower()
    for term in vocab:
        t = term.lower()
        if t and (t in e or e in t):
            return True
    return False


def verify_note(
    note: NoteRecord,
    space: SearchSpace,
    store: KnowledgeStore | None = None,
    whitelist: tuple[str, ...] = (),
) -> VerificationReport:
    """Rule-based triple screening against the campaign's search space.

    A triple passes when its subject or object matches a parameter name or
    choice by case-insensitive substring (either direction), or is whitelisted.
    Triples already present in the store, or repeated within the note, are
    rejected as redundant.
    """
    vocab = _space_vocabulary(space)
    wl = [w.lower() for w in whitelist]
    accepted: list[KnowledgeTriple] = []
    rejected: list[tuple[KnowledgeTriple, str]] = []
    seen: set[tuple[str, str, str]] = set()
    for t in note.triples:
        key = t.as_tuple()
        if key in seen or (store is not None and store.has_triple(t)):
            rejected.append((t, "redundant: triple already stored"))
            continue
        seen.add(key)
        whitelisted = t.subject.lower() in wl or t.object.lower() in wl
        if whitelisted or _entity_matches(t.subject, vocab) or _entity_matches(t.object, vocab):
            accepted.append(t)
        else:
            rejected.append((t, "no entity matches the search space"))
    return VerificationReport(accepted=tuple(accepted), rejected=tuple(rejected))


# ---------------------------------------------------------------------------
# retrieval

def _triple_entities(t: KnowledgeTriple) -> tuple[str, str]:
    return (t.subject.lower(), t.object.lower())


def query_keywords(
    store: KnowledgeStore,
    keywords: list[str] | tuple[str, ...],
    k: int = 5,
    depth: int = 1,
) -> QueryResult:
    """Graph traversal by keyword substring, then top-k cosine retrieval."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if depth not in (1, 2):
        raise ValueError("depth must be 1 or 2")
    terms = [kw.lower() for kw in keywords if kw.strip()]
    if not terms:
        return QueryResult()

    matched_idx: list[int] = []
    matched_set: set[int] = set()
    frontier_entities: set[str] = set()
    for i, t in enumerate(store.triples):
        subj, obj = _triple_entities(t)
        if any(term in subj or term in obj for term in terms):
            matched_idx.append(i)
            matched_set.add(i)
            frontier_entities.update((subj, obj))
    for _ in range(depth - 1):
        new_entities: set[str] = set()
        for i, t in enumerate(store.triples):
            if i in matched_set:
                continue
            subj, obj = _triple_entities(t)
            if subj in frontier_entities or obj in frontier_entities:
                matched_idx.append(i)
                matched_set.add(i)
                new_entities.update((subj, obj))
        frontier_entities = new_entities

    triples = tuple(store.triples[i] for i in sorted(matched_idx))

    query_vec = store.embedder.embed(" ".join(keywords))
    query_norm = float(np.linalg.norm(query_vec))
    scored = [
        (cosine_similarity(query_vec, query_norm, e.embedding, e.norm), e)
        for e in store.entries
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1].id))
    passages = tuple((e.text, sim) for sim, e in scored[:k])
    return QueryResult(triples=triples, passages=passages)


TRUNCATION_MARKER = "...[truncated]"


def render_knowledge(result: QueryResult, char_budget: int = 2000) -> str:
    """Deterministic prompt block: triples first, then scored passages."""
    if result.is_empty():
        return ""
    lines: list[str] = []
    if result.triples:
        lines.append("Known relations:")
        lines.extend(t.render() for t in result.triples)
    if result.passages:
        if lines:
            lines.append("")
        lines.append("Relevant notes:")
        for text, sim in result.passages:
            lines.append(f"- [similarity={sim:.3f}] {text}")
    block = "\n".join(lines)
    if len(block) > char_budget:
        block = block[: max(char_budget - len(TRUNCATION_MARKER), 0)] + TRUNCATION_MARKER
    return block
