"""Ask-tell HTTP service over the campaign loop.

Every state change is an event appended to a per-campaign JSONL file before
the in-memory state mutates, so a killed process reconstructs the identical
campaign on restart. Suggestions are idempotent until observed.
"""

from __future__ import annotations

import json
import math
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from reasonbo.acquisition import AcquisitionConfig, CandidatePool, optimize_acquisition
from reasonbo.backends import ChatBackend, DisabledBackend
from reasonbo.core import (
    CampaignState,
    Hypothesis,
    InsightsObject,
    Observation,
    PointAssignment,
    SpaceValidationError,
    Trial,
    best_so_far,
    compass_from_dict,
    compass_to_dict,
)
from reasonbo.events import Clock, EventLog, WallClock
from reasonbo.knowledge import (
    HashedEmbedder,
    KnowledgeStore,
    QueryResult,
    query_keywords,
    render_knowledge,
)
from reasonbo.loop import (
    CampaignDriver,
    LoopConfig,
    _ACQ,
    _INIT,
    _insights_payload,
    _render_history,
    _render_pool,
    _render_trials,
    confidence_table,
)
from reasonbo.baselines import random_point

import numpy as np


class ApiError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


def _point_doc(point: PointAssignment) -> dict:
    return dict(sorted(point.values.items()))


def _point_from_doc(doc: dict) -> PointAssignment:
    values = {}
    for k, v in doc.items():
        values[k] = v if isinstance(v, str) else float(v)
    return PointAssignment(values=values)


def _insights_from_payload(doc: dict) -> InsightsObject:
    return InsightsObject(
        comments=doc.get("comments", ""),
        keywords=tuple(doc.get("keywords", ())),
        hypotheses=tuple(
            Hypothesis(id=h["id"], statement=h["statement"],
                       confidence=float(h["confidence"]), status=h["status"])
            for h in doc.get("hypotheses", ())
        ),
        candidates=tuple(_point_from_doc(d) for d in doc.get("candidates", ())),
    )


class ServiceCampaign:
    """One campaign's ask-tell wrapper around the batch driver phases."""

    def __init__(
        self,
        campaign_id: str,
        compass,
        seed: int,
        state_dir: Path,
        backend: ChatBackend | None,
        clock: Clock | None,
    ):
        self.id = campaign_id
        self.lock = threading.Lock()
        self.state_dir = state_dir
        self.events_path = state_dir / f"{campaign_id}.jsonl"
        self.knowledge_path = state_dir / f"{campaign_id}-knowledge.jsonl"
        self.log = EventLog(self.events_path, clock=clock or WallClock())
        store = KnowledgeStore(HashedEmbedder(), path=self.knowledge_path)
        self.driver = CampaignDriver(
            compass=compass,
            backend=backend if backend is not None else DisabledBackend(),
            evaluator=None,
            seed=seed,
            store=store,
            event_log=self.log,
        )
        self.open: list[Trial] = []
        self.pool_by_round: dict[int, CandidatePool] = {}
        self.posted_through = 0
        self.initialized = False
        self.finished_payload: dict | None = None
        if self.log.events:
            self._replay()
        else:
            self.log.append("created", {
                "compass_title": self.driver.compass.title,
                "seed": self.driver.seed,
                "budget": self.driver.total_budget,
            })

    # -- event replay --------------------------------------------------------

    def _replay(self) -> None:
        d = self.driver
        trials: list[Trial] = []
        observations: list[Observation] = []
        history: list[InsightsObject] = []
        pool_points: dict[int, tuple] = {}
        observed_ids: set[str] = set()
        last_posted = -1
        for event in self.log.events:
            kind, payload = event.kind, event.payload
            if kind == "trial-proposed":
                doc = payload["trial"]
                trials.append(Trial(
                    id=doc["id"], round=int(doc["round"]),
                    point=_point_from_doc(doc["point"]), origin=doc["origin"],
                ))
                if "pool" in payload:
                    pool = CandidatePool(
                        round=int(doc["round"]),
                        points=tuple(_point_from_doc(p["point"]) for p in payload["pool"]),
                        acquisition_values=tuple(float(p["score"]) for p in payload["pool"]),
                        short_pool=bool(payload.get("short_pool", False)),
                    )
                    self.pool_by_round[pool.round] = pool
            elif kind == "observation-recorded":
                observations.append(Observation(
                    trial_id=payload["trial_id"], value=float(payload["value"]),
                ))
                observed_ids.add(payload["trial_id"])
            elif kind == "insights":
                if payload.get("insights") is not None:
                    history.append(_insights_from_payload(payload["insights"]))
                d.last_reasoning_text = payload.get("raw", "")
                last_posted = max(last_posted, int(payload["round"]))
            elif kind == "finished":
                self.finished_payload = {
                    "summary": payload.get("summary", ""),
                    "confidence_table": payload.get("confidence_table", ""),
                    "conclusion": payload.get("conclusion", ""),
                    "best_value": payload.get("best_value"),
                }
        for r, pool in self.pool_by_round.items():
            pool_points[r] = pool.points
        d.state = CampaignState(
            compass=d.compass,
            trials=tuple(trials),
            observations=tuple(observations),
            insight_history=tuple(history),
            candidate_pool_history=tuple(
                (r, pool_points[r]) for r in sorted(pool_points)
            ),
            status=self._derived_status(trials),
        )
        d.proposed = len(trials)
        self.initialized = any(t.round == 0 for t in trials)
        self.open = [t for t in trials if t.id not in observed_ids]
        self.posted_through = max(last_posted, 0)
        if trials:
            d.next_round = max(t.round for t in trials) + 1

    def _derived_status(self, trials) -> str:
        if self.finished_payload is not None:
            return "finished"
        return "running" if trials else "initializing"

    # -- proposal phases -----------------------------------------------------

    def _emit_trials(self, trials: list[Trial], pool: CandidatePool | None) -> None:
        d = self.driver
        for i, trial in enumerate(trials):
            payload: dict = {
                "trial": {
                    "id": trial.id,
                    "round": trial.round,
                    "origin": trial.origin,
                    "point": _point_doc(trial.point),
                },
            }
            if pool is not None and i == 0:
                payload["pool"] = [
                    {"point": _point_doc(p), "score": v}
                    for p, v in zip(pool.points, pool.acquisition_values)
                ]
                payload["short_pool"] = pool.short_pool
            self.log.append("trial-proposed", payload)
        d.state = d.state.with_updates(
            trials=d.state.trials + tuple(trials), status="running"
        )
        d.proposed += len(trials)
        self.open = list(trials)

    def _propose_initial(self) -> None:
        d = self.driver
        d.generate_overview()
        d.extract_compass_notes()
        insights = d.generate_initial_insights()

        n0 = min(d.compass.budget.candidates_per_round, d.total_budget)
        chosen: list[PointAssignment] = []
        if insights is not None:
            dedup: dict[tuple, PointAssignment] = {}
            for p in insights.candidates:
                dedup.setdefault(p.key(), p)
            chosen = list(dedup.values())[:n0]
        if len(chosen) < n0:
            rng = d._rng(0, _INIT)
            seen = {p.key() for p in chosen}
            while len(chosen) < n0:
                p = random_point(d.compass.space, rng)
                if p.key() in seen:
                    continue
                seen.add(p.key())
                chosen.append(p)
        trials = [
            Trial(id=f"t000-{i}", round=0, point=p, origin="llm-init")
            for i, p in enumerate(chosen)
        ]
        if insights is not None:
            d.state = d.state.with_updates(
                insight_history=d.state.insight_history + (insights,)
            )
        self.log.append("insights", {
            "round": 0,
            "insights": _insights_payload(insights) if insights is not None else None,
            "raw": d.last_reasoning_text,
        })
        self._emit_trials(trials, pool=None)
        self.initialized = True
        d.next_round = 1

    def _post_round(self, r: int) -> None:
        """Notes, retrieval, and the next insights pass for a completed round."""
        d = self.driver
        if d.last_reasoning_text:
            reply = d._chat("notes-reasoning", reasoning_text=d.last_reasoning_text)
            if reply is not None:
                d._store_parsed_note(reply, f"n{r:03d}", "reasoning", r)
            d.last_reasoning_text = ""
        keywords: tuple[str, ...] = ()
        if d.state.insight_history:
            keywords = d.state.insight_history[-1].keywords
        retrieved = QueryResult()
        if keywords:
            retrieved = query_keywords(
                d.store, list(keywords),
                k=d.config.knowledge_k, depth=d.config.knowledge_depth,
            )
        pool = self.pool_by_round.get(r)
        insights, raw = d._insights_with_retries(
            "loop-insights",
            compass=d._compass_text(),
            insight_history=_render_history(d.state, d.config.history_window),
            trial_data=_render_trials(d.state),
            candidate_pool=_render_pool(pool) if pool is not None else "(none)",
            retrieved_knowledge=render_knowledge(
                retrieved, d.config.knowledge_char_budget
            ) or "(none)",
        )
        d.last_reasoning_text = raw
        if insights is not None:
            d.state = d.state.with_updates(
                insight_history=d.state.insight_history + (insights,)
            )
        self.log.append("insights", {
            "round": r,
            "insights": _insights_payload(insights) if insights is not None else None,
            "raw": raw,
        })
        if pool is not None:
            d.state = d.state.with_updates(
                candidate_pool_history=d.state.candidate_pool_history
                + ((r, pool.points),)
            )
        self.posted_through = r
        d.next_round = r + 1

    def _propose_round(self, t: int) -> None:
        d = self.driver
        remaining = d.total_budget - d.proposed
        size = min(d.compass.budget.candidates_per_round, remaining)
        model = d._fit_surrogate(t)
        acq = AcquisitionConfig(
            kind=d.config.acquisition_kind, mc_samples=d.config.mc_samples
        )
        pool = optimize_acquisition(
            model, d.compass.space, acq,
            pool_size=d.compass.budget.bo_pool_size,
            restarts=d.config.acq_restarts,
            seed=np.random.SeedSequence([d.seed, t, _ACQ]),
            round_index=t,
        )
        self.pool_by_round[t] = pool
        n_select = min(size, len(pool.points))
        selected, _, fell_back = d.filter_candidates(pool, n_select, t)
        origin = "bo-proposed" if fell_back else "llm-selected"
        trials = [
            Trial(id=f"t{t:03d}-{i}", round=t, point=p, origin=origin)
            for i, p in enumerate(selected)
        ]
        self._emit_trials(trials, pool=pool)

    # -- public operations (caller holds self.lock) ---------------------------

    def suggest(self) -> dict:
        d = self.driver
        if self.finished_payload is not None:
            return {"round": d.next_round, "suggestions": [], "status": "finished"}
        if self.open:
            return self._open_view(new=False)
        if not self.initialized:
            self._propose_initial()
            return self._open_view(new=True)
        last_round = max(t.round for t in d.state.trials)
        if last_round >= 1 and self.posted_through < last_round:
            self._post_round(last_round)
        if d.proposed >= d.total_budget:
            return {"round": d.next_round, "suggestions": [], "status": "exhausted"}
        self._propose_round(last_round + 1)
        return self._open_view(new=True)

    def _open_view(self, new: bool) -> dict:
        return {
            "round": self.open[0].round if self.open else self.driver.next_round,
            "suggestions": [
                {"trial_id": t.id, "point": _point_doc(t.point), "origin": t.origin}
                for t in self.open
            ],
            "new": new,
            "status": "running",
        }

    def observe(self, trial_id: str, value) -> dict:
        d = self.driver
        by_id = {t.id: t for t in d.state.trials}
        if trial_id not in by_id:
            raise ApiError(404, f"unknown trial: {trial_id}")
        if any(o.trial_id == trial_id for o in d.state.observations):
            raise ApiError(409, f"trial already observed: {trial_id}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ApiError(422, "value must be a number")
        value = float(value)
        if not math.isfinite(value):
            raise ApiError(422, "value must be finite")
        self.log.append("observation-recorded", {"trial_id": trial_id, "value": value})
        obs = Observation(trial_id=trial_id, value=value)
        d.state = d.state.with_updates(observations=d.state.observations + (obs,))
        self.open = [t for t in self.open if t.id != trial_id]
        return {
            "trial_id": trial_id,
            "value": value,
            "remaining_open": len(self.open),
            "round_complete": not self.open,
        }

    def state_view(self) -> dict:
        d = self.driver
        observed = {o.trial_id: o.value for o in d.state.observations}
        best = d.state.best_observed()
        return {
            "id": self.id,
            "title": d.compass.title,
            "compass": compass_to_dict(d.compass),
            "objective": d.compass.space.objective_name,
            "direction": d.compass.space.direction,
            "status": "finished" if self.finished_payload is not None
                      else d.state.status,
            "seed": d.seed,
            "budget": d.total_budget,
            "proposed": d.proposed,
            "n_observed": len(d.state.observations),
            "open": [t.id for t in self.open],
            "trials": [
                {
                    "id": t.id, "round": t.round, "origin": t.origin,
                    "point": _point_doc(t.point),
                    "value": observed.get(t.id),
                }
                for t in d.state.trials
            ],
            "best": None if best is None else {
                "trial_id": best[0].id,
                "point": _point_doc(best[0].point),
                "value": best[1].value,
            },
            "insight_rounds": len(d.state.insight_history),
        }

    def insights_view(self) -> dict:
        rounds = [
            {"round": int(e.payload["round"]), "insights": e.payload.get("insights")}
            for e in self.log.events if e.kind == "insights"
        ]
        return {
            "insights": rounds,
            "confidence_table": confidence_table(self.driver.state),
        }

    def report_view(self) -> dict:
        d = self.driver
        by_id = {t.id: t for t in d.state.trials}
        values = [o.value for o in d.state.observations]
        running = best_so_far(values, d.compass.space.direction) if values else []
        best = d.state.best_observed()
        return {
            "id": self.id,
            "objective": d.compass.space.objective_name,
            "direction": d.compass.space.direction,
            "status": "finished" if self.finished_payload is not None
                      else d.state.status,
            "n_observations": len(values),
            "best": None if best is None else {
                "trial_id": best[0].id,
                "point": _point_doc(best[0].point),
                "value": best[1].value,
            },
            "trajectory": [
                {
                    "trial_id": o.trial_id,
                    "round": by_id[o.trial_id].round,
                    "value": o.value,
                    "best_so_far": b,
                }
                for o, b in zip(d.state.observations, running)
            ],
        }

    def finalize(self) -> dict:
        d = self.driver
        if self.finished_payload is not None:
            return self.finished_payload
        if self.open:
            raise ApiError(409, "open suggestions pending; observe them first")
        if d.state.trials:
            last_round = max(t.round for t in d.state.trials)
            if last_round >= 1 and self.posted_through < last_round:
                self._post_round(last_round)
        summary, table = d.generate_summary()
        conclusion = d.generate_conclusion()
        d.state = d.state.with_updates(status="finished")
        best = d.state.best_observed()
        payload = {
            "summary": summary,
            "confidence_table": table,
            "conclusion": conclusion,
            "best_value": best[1].value if best else None,
        }
        self.log.append("finished", {
            **payload, "n_observations": len(d.state.observations),
        })
        self.finished_payload = payload
        return payload


class CampaignRegistry:
    """All campaigns under one state directory, rebuilt from disk at startup."""

    def __init__(self, state_dir: str | Path,
                 backend: ChatBackend | None = None,
                 clock: Clock | None = None):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.backend = backend
        self.clock = clock
        self.lock = threading.Lock()
        self.campaigns: dict[str, ServiceCampaign] = {}
        for meta_path in sorted(self.state_dir.glob("*-compass.json")):
            campaign_id = meta_path.name[: -len("-compass.json")]
            doc = json.loads(meta_path.read_text(encoding="utf-8"))
            self.campaigns[campaign_id] = ServiceCampaign(
                campaign_id,
                compass_from_dict(doc["compass"]),
                int(doc.get("seed", 0)),
                self.state_dir,
                self.backend,
                self.clock,
            )

    def create(self, compass_doc: dict, seed: int) -> ServiceCampaign:
        try:
            compass = compass_from_dict(compass_doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(422, f"invalid compass: {exc}")
        with self.lock:
            campaign_id = f"c{len(self.campaigns) + 1:06d}"
            while campaign_id in self.campaigns:
                campaign_id = f"c{int(campaign_id[1:]) + 1:06d}"
            meta_path = self.state_dir / f"{campaign_id}-compass.json"
            try:
                campaign = ServiceCampaign(
                    campaign_id, compass, seed, self.state_dir,
                    self.backend, self.clock,
                )
            except SpaceValidationError as exc:
                raise ApiError(422, f"invalid compass: {exc}")
            meta_path.write_text(
                json.dumps({"compass": compass_to_dict(compass), "seed": seed},
                           sort_keys=True),
                encoding="utf-8",
            )
            self.campaigns[campaign_id] = campaign
            return campaign

    def get(self, campaign_id: str) -> ServiceCampaign:
        campaign = self.campaigns.get(campaign_id)
        if campaign is None:
            raise ApiError(404, f"unknown campaign: {campaign_id}")
        return campaign


def create_app(state_dir: str | Path,
               backend: ChatBackend | None = None,
               clock: Clock | None = None) -> FastAPI:
    registry = CampaignRegistry(state_dir, backend=backend, clock=clock)
    app = FastAPI(title="reasonbo service", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    app.state.registry = registry

    def _error(exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail})

    async def _body(request: Request) -> dict:
        raw = await request.body()
        if not raw:
            return {}
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError:
            raise ApiError(400, "malformed JSON body")
        if not isinstance(doc, dict):
            raise ApiError(400, "body must be a JSON object")
        return doc

    @app.exception_handler(ApiError)
    async def _handle(request: Request, exc: ApiError):
        return _error(exc)

    @app.get("/v1/health")
    async def health():
        return {"status": "ok", "campaigns": len(registry.campaigns)}

    @app.get("/v1/campaigns")
    async def list_campaigns():
        with registry.lock:
            items = [
                {"id": c.id, "title": c.driver.compass.title,
                 "status": "finished" if c.finished_payload is not None
                           else c.driver.state.status}
                for _, c in sorted(registry.campaigns.items())
            ]
        return {"campaigns": items}

    @app.post("/v1/campaigns", status_code=201)
    async def create_campaign(request: Request):
        doc = await _body(request)
        if "compass" not in doc or not isinstance(doc["compass"], dict):
            raise ApiError(422, "body must contain a compass object")
        seed = doc.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ApiError(422, "seed must be an integer")
        campaign = await run_in_threadpool(registry.create, doc["compass"], seed)
        return {"id": campaign.id, "title": campaign.driver.compass.title}

    @app.get("/v1/campaigns/{campaign_id}")
    async def get_campaign(campaign_id: str):
        campaign = registry.get(campaign_id)

        def work():
            with campaign.lock:
                return campaign.state_view()

        return await run_in_threadpool(work)

    @app.post("/v1/campaigns/{campaign_id}/suggest")
    async def suggest(campaign_id: str):
        campaign = registry.get(campaign_id)

        def work():
            with campaign.lock:
                return campaign.suggest()

        return await run_in_threadpool(work)

    @app.post("/v1/campaigns/{campaign_id}/observe")
    async def observe(campaign_id: str, request: Request):
        campaign = registry.get(campaign_id)
        doc = await _body(request)
        if "trial_id" not in doc or not isinstance(doc["trial_id"], str):
            raise ApiError(422, "trial_id must be a string")
        if "value" not in doc:
            raise ApiError(422, "value is required")

        def work():
            with campaign.lock:
                return campaign.observe(doc["trial_id"], doc["value"])

        return await run_in_threadpool(work)

    @app.get("/v1/campaigns/{campaign_id}/insights")
    async def insights(campaign_id: str):
        campaign = registry.get(campaign_id)

        def work():
            with campaign.lock:
                return campaign.insights_view()

        return await run_in_threadpool(work)

    @app.get("/v1/campaigns/{campaign_id}/report")
    async def report(campaign_id: str):
        campaign = registry.get(campaign_id)

        def work():
            with campaign.lock:
                return campaign.report_view()

        return await run_in_threadpool(work)

    @app.post("/v1/campaigns/{campaign_id}/finalize")
    async def finalize(campaign_id: str):
        campaign = registry.get(campaign_id)

        def work():
            with campaign.lock:
                return campaign.finalize()

        return await run_in_threadpool(work)

    return app
