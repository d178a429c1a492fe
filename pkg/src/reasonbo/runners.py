"""Method drivers for batch campaigns: one code path, five configurations.

vanilla-bo and analytic-ei are the reasoning loop with the backend disabled,
which is what makes the degradation contract hold by construction.
"""

from __future__ import annotations

import csv
import importlib.resources
from dataclasses import dataclass
from pathlib import Path

from reasonbo.backends import ChatBackend, DisabledBackend
from reasonbo.baselines import RandomSearchState, cma_ask, cma_init, cma_tell, random_ask
from reasonbo.benchmarks import (
    ExternalEvaluatorSpec,
    external_eval,
    load_tabular,
    lookup_eval,
    synthetic_point_evaluator,
)
from reasonbo.core import MAXIMIZE, MINIMIZE, ExperimentCompass, best_so_far
from reasonbo.events import EventLog, LogicalClock
from reasonbo.knowledge import HashedEmbedder, KnowledgeStore
from reasonbo.loop import CampaignResult, LoopConfig, run_campaign
from reasonbo.metrics import TrajectorySet, collapse_batches, collapse_batches_min

METHODS = ("reasoning-bo", "vanilla-bo", "analytic-ei", "cma-es", "random")


class UnknownMethodError(ValueError):
    pass


@dataclass(frozen=True)
class TrajectoryRow:
    seed: int
    round: int
    trial: str
    value: float
    best_so_far: float


@dataclass(frozen=True)
class SeedRun:
    method: str
    seed: int
    rows: tuple[TrajectoryRow, ...]
    batch_sizes: tuple[int, ...]
    result: CampaignResult | None = None


def resolve_evaluator(compass: ExperimentCompass, base_dir: Path | None = None):
    """Build the objective callable from the compass's evaluator binding."""
    spec = compass.evaluator
    if spec is None:
        raise ValueError("compass has no evaluator binding; supply one to run campaigns")
    kind = spec.get("kind")
    if kind == "synthetic":
        return synthetic_point_evaluator(spec["name"])
    if kind == "table":
        ref = spec["csv"]
        if ref.startswith("pkg:"):
            path = importlib.resources.files("reasonbo") / "fixtures" / ref[4:]
        else:
            path = (base_dir / ref) if base_dir is not None else Path(ref)
        table = load_tabular(path, compass.space)
        return lambda point: lookup_eval(table, point)
    if kind == "external":
        ext = ExternalEvaluatorSpec(
            command=tuple(spec["command"]) if spec.get("command") else None,
            url=spec.get("url"),
            timeout=float(spec.get("timeout", 30.0)),
        )
        return lambda point: external_eval(ext, point)
    raise ValueError(f"unknown evaluator kind: {kind!r}")


def _rows_from_values(
    seed: int, direction: str,
    per_trial: list[tuple[int, str, float]],  # (round, trial id, value)
) -> tuple[TrajectoryRow, ...]:
    values = [v for _, _, v in per_trial]
    running = best_so_far(values, direction)
    return tuple(
        TrajectoryRow(seed=seed, round=r, trial=t, value=v, best_so_far=b)
        for (r, t, v), b in zip(per_trial, running)
    )


def _batch_plan(total: int, per_round: int) -> list[int]:
    sizes = []
    used = 0
    while used < total:
        size = min(per_round, total - used)
        sizes.append(size)
        used += size
    return sizes


def _run_loop_method(
    method: str,
    compass: ExperimentCompass,
    seed: int,
    budget: int,
    backend: ChatBackend,
    event_log: EventLog | None,
    store: KnowledgeStore | None,
) -> SeedRun:
    config = LoopConfig(
        acquisition_kind="analytic-logei" if method == "analytic-ei" else "qlogei"
    )
    result = run_campaign(
        compass, backend,
        evaluator=resolve_evaluator(compass),
        seed=seed,
        store=store if store is not None else KnowledgeStore(HashedEmbedder()),
        config=config,
        event_log=event_log,
        total_budget=budget,
    )
    by_id = {t.id: t for t in result.state.trials}
    per_trial = [
        (by_id[o.trial_id].round, o.trial_id, o.value)
        for o in result.state.observations
    ]
    batch_sizes = tuple(len(r.observations) for r in result.rounds)
    return SeedRun(
        method=method, seed=seed,
        rows=_rows_from_values(seed, compass.space.direction, per_trial),
        batch_sizes=batch_sizes,
        result=result,
    )


def _run_random(
    compass: ExperimentCompass, seed: int, budget: int, event_log: EventLog | None
) -> SeedRun:
    evaluator = resolve_evaluator(compass)
    state = RandomSearchState(seed=seed)
    per_trial: list[tuple[int, str, float]] = []
    if event_log is not None:
        event_log.append("created", {
            "compass_title": compass.title, "seed": seed, "budget": budget,
        })
    sizes = _batch_plan(budget, compass.budget.candidates_per_round)
    for r, size in enumerate(sizes):
        points, state = random_ask(state, compass.space, size)
        for i, point in enumerate(points):
            trial_id = f"t{r:03d}-{i}"
            if event_log is not None:
                event_log.append("trial-proposed", {
                    "trial": {"id": trial_id, "round": r, "origin": "manual",
                              "point": dict(sorted(point.values.items()))},
                })
            value = float(evaluator(point))
            per_trial.append((r, trial_id, value))
            if event_log is not None:
                event_log.append("observation-recorded",
                                 {"trial_id": trial_id, "value": value})
    if event_log is not None:
        event_log.append("finished", {"n_observations": len(per_trial)})
    return SeedRun(
        method="random", seed=seed,
        rows=_rows_from_values(seed, compass.space.direction, per_trial),
        batch_sizes=tuple(sizes),
    )


def _run_cma(
    compass: ExperimentCompass, seed: int, budget: int, event_log: EventLog | None
) -> SeedRun:
    evaluator = resolve_evaluator(compass)
    state = cma_init(compass.space, seed=seed)
    per_trial: list[tuple[int, str, float]] = []
    batch_sizes: list[int] = []
    if event_log is not None:
        event_log.append("created", {
            "compass_title": compass.title, "seed": seed, "budget": budget,
        })
    used = 0
    generation = 0
    maximize = compass.space.direction == MAXIMIZE
    while used < budget:
        points = cma_ask(state, compass.space)
        take = min(len(points), budget - used)
        values: list[float] = []
        for i, point in enumerate(points[:take]):
            trial_id = f"t{generation:03d}-{i}"
            if event_log is not None:
                event_log.append("trial-proposed", {
                    "trial": {"id": trial_id, "round": generation, "origin": "manual",
                              "point": dict(sorted(point.values.items()))},
                })
            value = float(evaluator(point))
            values.append(value)
            per_trial.append((generation, trial_id, value))
            if event_log is not None:
                event_log.append("observation-recorded",
                                 {"trial_id": trial_id, "value": value})
        used += take
        batch_sizes.append(take)
        if take == len(points):
            # a truncated final generation is evaluated but cannot be told back
            state = cma_tell(
                state, compass.space, points, values,
                direction=MAXIMIZE if maximize else MINIMIZE,
            )
        generation += 1
    if event_log is not None:
        event_log.append("finished", {"n_observations": len(per_trial)})
    return SeedRun(
        method="cma-es", seed=seed,
        rows=_rows_from_values(seed, compass.space.direction, per_trial),
        batch_sizes=tuple(batch_sizes),
    )


def run_seed(
    method: str,
    compass: ExperimentCompass,
    seed: int,
    budget: int | None = None,
    backend: ChatBackend | None = None,
    event_log: EventLog | None = None,
    store: KnowledgeStore | None = None,
) -> SeedRun:
    if method not in METHODS:
        raise UnknownMethodError(f"unknown method: {method!r} (expected one of {METHODS})")
    total = budget if budget is not None else compass.budget.total_evaluations
    if method == "random":
        return _run_random(compass, seed, total, event_log)
    if method == "cma-es":
        return _run_cma(compass, seed, total, event_log)
    if method == "reasoning-bo":
        if backend is None:
            backend = DisabledBackend()
    else:
        backend = DisabledBackend()
    return _run_loop_method(method, compass, seed, total, backend, event_log, store)


def write_trajectory_csv(path: str | Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(("seed", "round", "trial", "value", "best_so_far"))
        for row in rows:
            writer.writerow((row.seed, row.round, row.trial,
                             repr(row.value), repr(row.best_so_far)))


def read_trajectory_csv(path: str | Path) -> list[TrajectoryRow]:
    out: list[TrajectoryRow] = []
    with open(path, encoding="utf-8", newline="") as f:
        for doc in csv.DictReader(f):
            out.append(TrajectoryRow(
                seed=int(doc["seed"]), round=int(doc["round"]), trial=doc["trial"],
                value=float(doc["value"]), best_so_far=float(doc["best_so_far"]),
            ))
    return out


def trajectory_set_from_runs(
    runs: list[SeedRun], direction: str, f_star: float | None = None
) -> TrajectorySet:
    """Per-batch raw series per seed, ready for the metrics pipeline."""
    collapse = collapse_batches if direction == MAXIMIZE else collapse_batches_min
    per_seed = []
    for run in runs:
        values = [r.value for r in run.rows]
        per_seed.append(tuple(collapse(values, list(run.batch_sizes))))
    # equal-length guard: ragged batch structure would corrupt comparisons
    lengths = {len(seq) for seq in per_seed}
    if len(lengths) != 1:
        raise ValueError(f"seeds produced ragged batch counts: {sorted(lengths)}")
    return TrajectorySet(values=tuple(per_seed), direction=direction, f_star=f_star)


def rows_to_trajectory_set(
    rows: list[TrajectoryRow], direction: str, f_star: float | None = None
) -> TrajectorySet:
    by_seed: dict[int, list[TrajectoryRow]] = {}
    for row in rows:
        by_seed.setdefault(row.seed, []).append(row)
    collapse = collapse_batches if direction == MAXIMIZE else collapse_batches_min
    per_seed = []
    for seed in sorted(by_seed):
        seed_rows = by_seed[seed]
        sizes: dict[int, int] = {}
        for row in seed_rows:
            sizes[row.round] = sizes.get(row.round, 0) + 1
        batch_sizes = [sizes[r] for r in sorted(sizes)]
        per_seed.append(tuple(collapse([r.value for r in seed_rows], batch_sizes)))
    lengths = {len(seq) for seq in per_seed}
    if len(lengths) != 1:
        raise ValueError(f"seeds produced ragged batch counts: {sorted(lengths)}")
    return TrajectorySet(values=tuple(per_seed), direction=direction, f_star=f_star)


def make_logical_event_log(path: str | Path | None) -> EventLog:
    return EventLog(path=path, clock=LogicalClock())
