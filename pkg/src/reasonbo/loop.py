"""Campaign orchestration: overview, insights, filtered selection, rounds, report.

The loop degrades gracefully: any backend failure turns the affected phase
into its mechanical fallback (random initialization, top-n selection, no
notes), so a campaign with a disabled backend IS plain BO on the same seeds.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from reasonbo.acquisition import AcquisitionConfig, CandidatePool, optimize_acquisition
from reasonbo.backends import BackendError, BackendUnavailable, ChatBackend
from reasonbo.baselines import random_point
from reasonbo.core import (
    MAXIMIZE,
    CampaignState,
    ExperimentCompass,
    Hypothesis,
    InsightsObject,
    Observation,
    PointAssignment,
    SpaceEncoder,
    SpaceValidationError,
    Trial,
    validate_compass,
    validate_point,
)
from reasonbo.events import EventLog
from reasonbo.gp import GPModel, fit
from reasonbo.knowledge import (
    HashedEmbedder,
    KnowledgeStore,
    NoteRecord,
    QueryResult,
    parse_notes,
    query_keywords,
    render_knowledge,
    store_note,
    verify_note,
)
from reasonbo.prompts import SYSTEM_MESSAGE, PromptBundle, render_compass_text

# purpose tags for derived random streams
_INIT = 0
_FIT = 1
_ACQ = 2

_INDEX_LIST_RE = re.compile(r"\[[\s\d,]*\]")


class InsightsParseError(ValueError):
    pass


class EmptyCampaignError(ValueError):
    pass


@dataclass(frozen=True)
class LoopConfig:
    acquisition_kind: str = "qlogei"
    mc_samples: int = 128
    fit_restarts: int = 8
    acq_restarts: int = 24
    parse_retries: int = 3
    backend_attempts: int = 3
    knowledge_k: int = 3
    knowledge_depth: int = 2
    knowledge_char_budget: int = 2000
    narrative_temperature: float = 0.7
    history_window: int = 5


@dataclass(frozen=True)
class RoundRecord:
    round: int
    pool: CandidatePool | None
    selected: tuple[Trial, ...]
    observations: tuple[Observation, ...]
    insights: InsightsObject | None
    note: NoteRecord | None
    retrieved: QueryResult
    flags: tuple[str, ...]


@dataclass(frozen=True)
class CampaignResult:
    state: CampaignState
    summary: str
    confidence_table: str
    conclusion: str
    rounds: tuple[RoundRecord, ...]
    audit: tuple[str, ...]


@dataclass(frozen=True)
class EntityMention:
    term: str
    parameter: str
    role: str  # name | choice


# ---------------------------------------------------------------------------
# parsing LLM output

def _extract_json_object(text: str) -> dict:
    decoder = json.JSONDecoder()
    for start in range(len(text)):
        if text[start] != "{":
            continue
        try:
            doc, _ = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            continue
        if isinstance(doc, dict):
            return doc
    raise InsightsParseError("no JSON object found in reply")


def parse_insights_json(
    text: str, compass: ExperimentCompass
) -> tuple[InsightsObject, list[str]]:
    """Parse and validate an insights reply; drops invalid items with audit notes.

    Structural problems (no JSON object, wrong field types, keywords missing
    while hypotheses present) raise InsightsParseError so callers can retry.
    """
    doc = _extract_json_object(text)
    audit: list[str] = []

    comments = doc.get("comments", "")
    if not isinstance(comments, str):
        raise InsightsParseError("comments must be a string")
    keywords_raw = doc.get("keywords", [])
    if not isinstance(keywords_raw, list) or not all(isinstance(k, str) for k in keywords_raw):
        raise InsightsParseError("keywords must be a list of strings")
    keywords = tuple(k.strip() for k in keywords_raw if k.strip())

    hypotheses: list[Hypothesis] = []
    hyp_raw = doc.get("hypotheses", [])
    if not isinstance(hyp_raw, list):
        raise InsightsParseError("hypotheses must be a list")
    for i, h in enumerate(hyp_raw):
        if not isinstance(h, dict) or "statement" not in h:
            audit.append(f"hypothesis {i} dropped: not an object with a statement")
            continue
        try:
            confidence = float(h.get("confidence", 0.5))
        except (TypeError, ValueError):
            audit.append(f"hypothesis {i} dropped: confidence not numeric")
            continue
        if not (0.0 <= confidence <= 1.0) or not math.isfinite(confidence):
            audit.append(f"hypothesis {i} dropped: confidence {confidence!r} outside [0, 1]")
            continue
        status = h.get("status", "proposed")
        if status not in ("proposed", "supported", "refuted"):
            status = "proposed"
        hypotheses.append(Hypothesis(
            id=str(h.get("id", f"h{i + 1}")),
            statement=str(h["statement"]),
            confidence=confidence,
            status=status,
        ))
    if hypotheses and not keywords:
        raise InsightsParseError("keywords must be nonempty when hypotheses are present")

    candidates: list[PointAssignment] = []
    cand_raw = doc.get("candidates", [])
    if not isinstance(cand_raw, list):
        raise InsightsParseError("candidates must be a list")
    space = compass.space
    categorical_names = {p.name for p in space.parameters if p.choices is not None and p.kind == "categorical"}
    for i, cand in enumerate(cand_raw):
        if not isinstance(cand, dict):
            audit.append(f"candidate {i} dropped: not an object")
            continue
        values: dict[str, float | str] = {}
        for k, v in cand.items():
            if k in categorical_names:
                values[k] = str(v)
            else:
                try:
                    values[k] = float(v)
                except (TypeError, ValueError):
                    values[k] = str(v)
        point = PointAssignment(values)
        problems = validate_point(space, point)
        if problems:
            audit.append(f"candidate {i} dropped: {'; '.join(problems)}")
            continue
        candidates.append(point)

    return InsightsObject(
        comments=comments,
        keywords=keywords,
        hypotheses=tuple(hypotheses),
        candidates=tuple(candidates),
    ), audit


def parse_index_selection(text: str, pool_size: int, n: int) -> list[int] | None:
    """First JSON int list in the reply, iff it names exactly n distinct pool slots."""
    m = _INDEX_LIST_RE.search(text)
    if m is None:
        return None
    try:
        indices = json.loads(m.group(0))
    except json.JSONDecodeError:
        return None
    if not isinstance(indices, list) or len(indices) != n:
        return None
    if not all(isinstance(i, int) and 0 <= i < pool_size for i in indices):
        return None
    if len(set(indices)) != n:
        return None
    return indices


def extract_entities(overview: str, compass: ExperimentCompass) -> list[EntityMention]:
    """Case-insensitive scan of the overview for parameter and choice mentions."""
    low = overview.lower()
    mentions: list[EntityMention] = []
    for p in compass.space.parameters:
        if p.name.lower() in low:
            mentions.append(EntityMention(term=p.name, parameter=p.name, role="name"))
        for c in p.choices or ():
            if c.lower() in low:
                mentions.append(EntityMention(term=c, parameter=p.name, role="choice"))
    return mentions


# ---------------------------------------------------------------------------
# prompt context rendering

def _render_point(point: PointAssignment) -> str:
    parts = []
    for k in sorted(point.values):
        v = point.values[k]
        parts.append(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}")
    return ", ".join(parts)


def _render_trials(state: CampaignState) -> str:
    pairs = state.observed_trials()
    if not pairs:
        return "(no results yet)"
    lines = [
        f"{t.id} [round {t.round}] {_render_point(t.point)} -> {o.value:g}"
        for t, o in pairs
    ]
    return "\n".join(lines)


def _render_pool(pool: CandidatePool) -> str:
    lines = [
        f"{i}: {_render_point(p)} (score {v:.4f})"
        for i, (p, v) in enumerate(zip(pool.points, pool.acquisition_values))
    ]
    return "\n".join(lines)


def _render_history(state: CampaignState, window: int) -> str:
    if not state.insight_history:
        return "(no insights yet)"
    blocks = []
    start = max(len(state.insight_history) - window, 0)
    for i, ins in enumerate(state.insight_history[-window:]):
        lines = [f"Insight {start + i}: {ins.comments}"]
        for h in ins.hypotheses:
            lines.append(f"  - {h.id} ({h.status}, confidence {h.confidence:.2f}): {h.statement}")
        blocks.append("\n".join(lines))
    return "\n".join(blocks)


def confidence_table(state: CampaignState) -> str:
    """Markdown table of per-hypothesis confidence evolution, assembled mechanically."""
    rows: dict[str, dict] = {}
    for ins in state.insight_history:
        for h in ins.hypotheses:
            row = rows.setdefault(h.id, {"statement": h.statement, "confidences": [], "status": h.status})
            row["confidences"].append(h.confidence)
            row["status"] = h.status
            row["statement"] = h.statement
    if not rows:
        return "(no hypotheses were recorded)"
    lines = ["| Hypothesis | Statement | Confidence trajectory | Status |",
             "|---|---|---|---|"]
    for hid in sorted(rows):
        row = rows[hid]
        traj = ", ".join(f"{c:.2f}" for c in row["confidences"])
        lines.append(f"| {hid} | {row['statement']} | {traj} | {row['status']} |")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# driver

class CampaignDriver:
    """Stateful single-campaign runner; one instance per (compass, seed)."""

    def __init__(
        self,
        compass: ExperimentCompass,
        backend: ChatBackend,
        evaluator,
        seed: int,
        store: KnowledgeStore | None = None,
        prompts: PromptBundle | None = None,
        config: LoopConfig | None = None,
        event_log: EventLog | None = None,
        total_budget: int | None = None,
    ):
        problems = validate_compass(compass)
        if problems:
            raise SpaceValidationError("; ".join(problems))
        self.compass = compass
        self.backend = backend
        self.evaluator = evaluator
        self.seed = int(seed)
        self.store = store if store is not None else KnowledgeStore(HashedEmbedder())
        self.prompts = prompts if prompts is not None else PromptBundle()
        self.config = config if config is not None else LoopConfig()
        self.log = event_log
        self.encoder = SpaceEncoder(compass.space)
        self.total_budget = (
            int(total_budget) if total_budget is not None
            else compass.budget.total_evaluations
        )
        if self.total_budget < 1:
            raise EmptyCampaignError("budget must allow at least one evaluation")

        self.state = CampaignState(compass=compass)
        self.rounds: list[RoundRecord] = []
        self.audit: list[str] = []
        self.overview = ""
        self.entities: list[EntityMention] = []
        self.last_reasoning_text = ""
        self.proposed = 0
        self.next_round = 0
        self.model: GPModel | None = None

    # -- plumbing ----------------------------------------------------------

    def _rng(self, round_index: int, purpose: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.seed, round_index, purpose])
        )

    def _emit(self, kind: str, payload: dict) -> None:
        if self.log is not None:
            self.log.append(kind, payload)

    def _chat(self, phase: str, temperature: float = 0.0, extra: str = "",
              **values: str) -> str | None:
        prompt = self.prompts.render(phase, **values)
        if extra:
            prompt = f"{prompt}\n\n{extra}"
        messages = [
            {"role": "system", "content": SYSTEM_MESSAGE},
            {"role": "user", "content": prompt},
        ]
        for attempt in range(self.config.backend_attempts):
            try:
                return self.backend.complete(messages, temperature=temperature)
            except BackendUnavailable:
                self.audit.append(f"{phase}: backend unavailable, degraded")
                return None
            except BackendError as exc:
                self.audit.append(f"{phase}: backend error attempt {attempt + 1}: {exc}")
        return None

    def _compass_text(self) -> str:
        return render_compass_text(self.compass)

    def _internal_values(self, values: list[float]) -> list[float]:
        if self.compass.space.direction == MAXIMIZE:
            return values
        return [-v for v in values]

    # -- phases ------------------------------------------------------------

    def generate_overview(self) -> str:
        reply = self._chat("overview", temperature=self.config.narrative_temperature,
                           compass=self._compass_text())
        if reply is None:
            reply = self._compass_text()
            self.audit.append("overview: mechanical fallback used")
        self.overview = reply
        self.entities = extract_entities(reply, self.compass)
        return reply

    def _store_parsed_note(self, text: str, note_id: str, source: str,
                           round_index: int | None) -> NoteRecord | None:
        note, parse_audit = parse_notes(text, note_id=note_id, source=source,
                                        round=round_index)
        self.audit.extend(f"{note_id}: {a}" for a in parse_audit)
        report = verify_note(note, self.compass.space, store=self.store)
        for t, reason in report.rejected:
            self.audit.append(f"{note_id}: triple rejected ({reason}): {t.render()}")
        store_note(self.store, note, report.accepted)
        self._emit("note-stored", {
            "note_id": note.id,
            "source": note.source,
            "round": note.round,
            "accepted_triples": [list(t.as_tuple()) for t in report.accepted],
            "rejected": [[*t.as_tuple(), reason] for t, reason in report.rejected],
        })
        return note

    def extract_compass_notes(self) -> NoteRecord | None:
        reply = self._chat("notes-compass", compass=self._compass_text(),
                           overview=self.overview)
        if reply is None:
            return None
        return self._store_parsed_note(reply, "n000-compass", "compass", None)

    def _insights_with_retries(self, phase: str, **values: str) -> tuple[InsightsObject | None, str]:
        """Insights call with parse retries echoing the validation error back."""
        extra = ""
        for _ in range(self.config.parse_retries):
            reply = self._chat(phase, extra=extra, **values)
            if reply is None:
                return None, ""
            try:
                insights, drop_audit = parse_insights_json(reply, self.compass)
            except InsightsParseError as exc:
                self.audit.append(f"{phase}: parse failed: {exc}")
                extra = (f"Your previous reply could not be used: {exc}. "
                         "Reply with only the JSON object.")
                continue
            self.audit.extend(f"{phase}: {a}" for a in drop_audit)
            return insights, reply
        self.audit.append(f"{phase}: giving up after {self.config.parse_retries} parse attempts")
        return None, ""

    def generate_initial_insights(self) -> InsightsObject | None:
        n0 = min(self.compass.budget.candidates_per_round, self.total_budget)
        insights, raw = self._insights_with_retries(
            "init-insights",
            compass=self._compass_text(),
            overview=self.overview,
            n_candidates=str(n0),
        )
        self.last_reasoning_text = raw
        return insights

    def _evaluate_trials(self, trials: list[Trial], pool: CandidatePool | None) -> list[Observation]:
        observations: list[Observation] = []
        for i, trial in enumerate(trials):
            payload: dict = {
                "trial": {
                    "id": trial.id,
                    "round": trial.round,
                    "origin": trial.origin,
                    "point": dict(sorted(trial.point.values.items())),
                },
            }
            if pool is not None and i == 0:
                payload["pool"] = [
                    {"point": dict(sorted(p.values.items())), "score": v}
                    for p, v in zip(pool.points, pool.acquisition_values)
                ]
                payload["short_pool"] = pool.short_pool
            self._emit("trial-proposed", payload)
        self.state = self.state.with_updates(trials=self.state.trials + tuple(trials))
        for trial in trials:
            try:
                value = float(self.evaluator(trial.point))
            except Exception as exc:  # evaluator failures never abort a round
                self.audit.append(f"{trial.id}: evaluation failed: {exc!r}")
                continue
            obs = Observation(trial_id=trial.id, value=value)
            observations.append(obs)
            self._emit("observation-recorded", {"trial_id": trial.id, "value": value})
        self.state = self.state.with_updates(
            observations=self.state.observations + tuple(observations)
        )
        return observations

    def initialize(self) -> RoundRecord:
        self._emit("created", {
            "compass_title": self.compass.title,
            "seed": self.seed,
            "budget": self.total_budget,
        })
        self.generate_overview()
        self.extract_compass_notes()
        insights = self.generate_initial_insights()
        flags: list[str] = []

        n0 = min(self.compass.budget.candidates_per_round, self.total_budget)
        chosen: list[PointAssignment] = []
        if insights is not None:
            dedup: dict[tuple, PointAssignment] = {}
            for p in insights.candidates:
                dedup.setdefault(p.key(), p)
            chosen = list(dedup.values())[:n0]
        if len(chosen) < n0:
            rng = self._rng(0, _INIT)
            flags.append(f"init: {n0 - len(chosen)} random top-up points")
            seen = {p.key() for p in chosen}
            while len(chosen) < n0:
                p = random_point(self.compass.space, rng)
                if p.key() in seen:
                    continue
                seen.add(p.key())
                chosen.append(p)

        trials = [
            Trial(id=f"t000-{i}", round=0, point=p, origin="llm-init")
            for i, p in enumerate(chosen)
        ]
        self.proposed += len(trials)
        observations = self._evaluate_trials(trials, pool=None)
        if insights is not None:
            self.state = self.state.with_updates(
                insight_history=self.state.insight_history + (insights,)
            )
            self._emit("insights", {"round": 0, "insights": _insights_payload(insights)})
        self.state = self.state.with_updates(status="running")
        record = RoundRecord(
            round=0, pool=None, selected=tuple(trials),
            observations=tuple(observations), insights=insights, note=None,
            retrieved=QueryResult(), flags=tuple(flags),
        )
        self.rounds.append(record)
        self.next_round = 1
        return record

    def _fit_surrogate(self, round_index: int) -> GPModel:
        pairs = self.state.observed_trials()
        X = self.encoder.encode_many([t.point for t, _ in pairs])
        y = self._internal_values([o.value for _, o in pairs])
        return fit(X, np.asarray(y), restarts=self.config.fit_restarts,
                   seed=np.random.SeedSequence([self.seed, round_index, _FIT]))

    def filter_candidates(self, pool: CandidatePool, n: int,
                          round_index: int) -> tuple[list[PointAssignment], str, bool]:
        """LLM index selection over the pool; malformed replies fall back to top-n."""
        reply = self._chat(
            "filter",
            compass=self._compass_text(),
            insight_history=_render_history(self.state, self.config.history_window),
            trial_data=_render_trials(self.state),
            candidate_pool=_render_pool(pool),
            n_select=str(n),
        )
        if reply is not None:
            indices = parse_index_selection(reply, len(pool.points), n)
            if indices is not None:
                return [pool.points[i] for i in indices], reply, False
            self.audit.append(f"round {round_index}: selection unparseable, top-{n} fallback")
        return list(pool.points[:n]), reply or "", True

    def run_round(self) -> RoundRecord:
        t = self.next_round
        remaining = self.total_budget - self.proposed
        if remaining <= 0:
            raise EmptyCampaignError("budget exhausted")
        size = min(self.compass.budget.candidates_per_round, remaining)
        flags: list[str] = []

        self.model = self._fit_surrogate(t)
        acq = AcquisitionConfig(
            kind=self.config.acquisition_kind, mc_samples=self.config.mc_samples
        )
        pool = optimize_acquisition(
            self.model, self.compass.space, acq,
            pool_size=self.compass.budget.bo_pool_size,
            restarts=self.config.acq_restarts,
            seed=np.random.SeedSequence([self.seed, t, _ACQ]),
            round_index=t,
        )
        if pool.short_pool:
            flags.append("short pool")

        n_select = min(size, len(pool.points))
        selected, _, fell_back = self.filter_candidates(pool, n_select, t)
        if fell_back:
            flags.append("selection fallback")
        origin = "bo-proposed" if fell_back else "llm-selected"
        trials = [
            Trial(id=f"t{t:03d}-{i}", round=t, point=p, origin=origin)
            for i, p in enumerate(selected)
        ]
        self.proposed += len(trials)
        observations = self._evaluate_trials(trials, pool=pool)

        note = None
        if self.last_reasoning_text:
            reply = self._chat("notes-reasoning", reasoning_text=self.last_reasoning_text)
            if reply is not None:
                note = self._store_parsed_note(reply, f"n{t:03d}", "reasoning", t)
            self.last_reasoning_text = ""

        keywords: tuple[str, ...] = ()
        if self.state.insight_history:
            keywords = self.state.insight_history[-1].keywords
        retrieved = QueryResult()
        if keywords:
            retrieved = query_keywords(
                self.store, list(keywords),
                k=self.config.knowledge_k, depth=self.config.knowledge_depth,
            )

        insights, raw = self._insights_with_retries(
            "loop-insights",
            compass=self._compass_text(),
            insight_history=_render_history(self.state, self.config.history_window),
            trial_data=_render_trials(self.state),
            candidate_pool=_render_pool(pool),
            retrieved_knowledge=render_knowledge(
                retrieved, self.config.knowledge_char_budget
            ) or "(none)",
        )
        self.last_reasoning_text = raw
        if insights is not None:
            self.state = self.state.with_updates(
                insight_history=self.state.insight_history + (insights,)
            )
            self._emit("insights", {"round": t, "insights": _insights_payload(insights)})

        self.state = self.state.with_updates(
            candidate_pool_history=self.state.candidate_pool_history
            + ((t, pool.points),)
        )
        record = RoundRecord(
            round=t, pool=pool, selected=tuple(trials),
            observations=tuple(observations), insights=insights, note=note,
            retrieved=retrieved, flags=tuple(flags),
        )
        self.rounds.append(record)
        self.next_round += 1
        return record

    def generate_summary(self) -> tuple[str, str]:
        table = confidence_table(self.state)
        reply = self._chat(
            "summary", temperature=self.config.narrative_temperature,
            compass=self._compass_text(),
            trial_data=_render_trials(self.state),
            insight_history=_render_history(self.state, self.config.history_window),
            confidence_table=table,
        )
        if reply is None:
            self.audit.append("summary: narrative unavailable, mechanical table only")
            reply = "(narrative unavailable)"
        return reply, table

    def generate_conclusion(self) -> str:
        best = self.state.best_observed()
        if best is not None:
            best_point = _render_point(best[0].point)
            best_value = repr(best[1].value)
        else:
            best_point, best_value = "(none)", "(none)"
        reply = self._chat(
            "conclusion", temperature=self.config.narrative_temperature,
            compass=self._compass_text(),
            trial_data=_render_trials(self.state),
            insight_history=_render_history(self.state, self.config.history_window),
            best_point=best_point,
            best_value=best_value,
        )
        if reply is None:
            reply = self._mechanical_conclusion(best_point, best_value)
        # the measured optimum is injected mechanically, never left to the LLM
        return (
            f"{reply}\n\nBest observed configuration: {best_point} "
            f"with {self.compass.space.objective_name} = {best_value}"
        )

    def _mechanical_conclusion(self, best_point: str, best_value: str) -> str:
        n_obs = len(self.state.observations)
        n_rounds = len(self.rounds)
        hyps = [h for ins in self.state.insight_history for h in ins.hypotheses]
        supported = [h for h in hyps if h.status == "supported"]
        findings = (
            "; ".join(f"{h.id}: {h.statement}" for h in supported)
            if supported else
            ("hypotheses were recorded but none reached supported status"
             if hyps else "no hypotheses were recorded")
        )
        return "\n".join([
            f"1. Key outcomes: best {self.compass.space.objective_name} of "
            f"{best_value} at {best_point}.",
            f"2. Experimental retrospective: {n_obs} evaluations across "
            f"{n_rounds} batches.",
            "3. Milestones achieved: campaign ran to budget completion.",
            f"4. Definitive findings: {findings}.",
            "5. Forward guidance: continue from the best configuration and "
            "tighten ranges around it.",
            "6. Scientific impact: results provide a reusable baseline for "
            "this parameter space.",
        ])

    def run(self) -> CampaignResult:
        self.initialize()
        while self.proposed < self.total_budget:
            self.run_round()
        summary, table = self.generate_summary()
        conclusion = self.generate_conclusion()
        self.state = self.state.with_updates(status="finished")
        best = self.state.best_observed()
        self._emit("finished", {
            "summary": summary,
            "confidence_table": table,
            "conclusion": conclusion,
            "best_value": best[1].value if best else None,
            "n_observations": len(self.state.observations),
        })
        return CampaignResult(
            state=self.state,
            summary=summary,
            confidence_table=table,
            conclusion=conclusion,
            rounds=tuple(self.rounds),
            audit=tuple(self.audit),
        )


def _insights_payload(insights: InsightsObject) -> dict:
    return {
        "comments": insights.comments,
        "keywords": list(insights.keywords),
        "hypotheses": [
            {"id": h.id, "statement": h.statement,
             "confidence": h.confidence, "status": h.status}
            for h in insights.hypotheses
        ],
        "candidates": [dict(sorted(p.values.items())) for p in insights.candidates],
    }


def run_campaign(
    compass: ExperimentCompass,
    backend: ChatBackend,
    evaluator,
    seed: int,
    **driver_kwargs,
) -> CampaignResult:
    return CampaignDriver(compass, backend, evaluator, seed, **driver_kwargs).run()
