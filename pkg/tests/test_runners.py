"""Batch method drivers: budget accounting, trajectory CSVs, evaluator bindings."""

from __future__ import annotations

from importlib import resources

import pytest

from reasonbo.core import PointAssignment, load_compass
from reasonbo.events import EventLog, LogicalClock
from reasonbo.runners import (
    METHODS,
    SeedRun,
    TrajectoryRow,
    UnknownMethodError,
    make_logical_event_log,
    read_trajectory_csv,
    resolve_evaluator,
    rows_to_trajectory_set,
    run_seed,
    trajectory_set_from_runs,
    write_trajectory_csv,
)


def _compass(name: str):
    return load_compass(str(resources.files("reasonbo") / "compasses" / f"{name}.json"))


def test_unknown_method_raises():
    with pytest.raises(UnknownMethodError, match="annealing"):
        run_seed("annealing", _compass("hartmann6"), seed=0)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_vanilla_bo_budget_accounting(tmp_path, seed):
    run = run_seed("vanilla-bo", _compass("hartmann6"), seed=seed, budget=12)
    assert isinstance(run, SeedRun)
    assert len(run.rows) == 12
    assert run.batch_sizes == (3, 3, 3, 3)
    path = tmp_path / f"seed{seed}.csv"
    write_trajectory_csv(path, run.rows)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "seed,round,trial,value,best_so_far"
    assert len(lines) == 13


def test_trajectory_csv_roundtrip_is_exact(tmp_path):
    run = run_seed("random", _compass("hartmann6"), seed=7, budget=6)
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, run.rows)
    back = read_trajectory_csv(path)
    assert back == list(run.rows)


def test_random_budget_and_monotone_best():
    compass = _compass("hartmann6")
    run = run_seed("random", compass, seed=11, budget=12)
    assert len(run.rows) == 12
    assert run.batch_sizes == (3, 3, 3, 3)
    assert run.result is None
    # minimize direction: running best never increases
    bests = [r.best_so_far for r in run.rows]
    assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))
    again = run_seed("random", compass, seed=11, budget=12)
    assert again.rows == run.rows


def test_vanilla_bo_is_deterministic():
    compass = _compass("coupling")
    a = run_seed("vanilla-bo", compass, seed=4, budget=9)
    b = run_seed("vanilla-bo", compass, seed=4, budget=9)
    assert a.rows == b.rows


def test_cma_truncated_final_generation():
    compass = _compass("hartmann6")
    run = run_seed("cma-es", compass, seed=3, budget=12)
    # lambda = 4 + floor(3 ln 6) = 9 in 6 dimensions
    assert run.batch_sizes == (9, 3)
    assert len(run.rows) == 12
    assert [r.trial for r in run.rows[:2]] == ["t000-0", "t000-1"]
    assert run.rows[-1].trial == "t001-2"


def test_event_log_wiring(tmp_path):
    path = tmp_path / "events.jsonl"
    log = make_logical_event_log(path)
    assert isinstance(log, EventLog)
    assert isinstance(log.clock, LogicalClock)
    run_seed("random", _compass("hartmann6"), seed=0, budget=3, event_log=log)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 3 + 3 + 1  # created, 3 proposals, 3 observations, finished


def test_resolve_synthetic_evaluator():
    compass = _compass("hartmann6")
    ev = resolve_evaluator(compass)
    point = PointAssignment(values={f"x{i}": 0.5 for i in range(1, 7)})
    from reasonbo.benchmarks import eval_hartmann6

    assert ev(point) == pytest.approx(eval_hartmann6([0.5] * 6))


def test_resolve_table_evaluator_from_package_ref():
    compass = _compass("coupling")
    ev = resolve_evaluator(compass)
    values = dict(zip(
        (p.name for p in compass.space.parameters),
        (p.choices[0] for p in compass.space.parameters),
    ))
    assert isinstance(ev(PointAssignment(values=values)), float)


def test_resolve_evaluator_errors():
    compass = _compass("hartmann6")
    from dataclasses import replace

    with pytest.raises(ValueError, match="no evaluator"):
        resolve_evaluator(replace(compass, evaluator=None))
    with pytest.raises(ValueError, match="quantum"):
        resolve_evaluator(replace(compass, evaluator={"kind": "quantum"}))


def test_trajectory_set_from_runs_collapses_batches():
    compass = _compass("hartmann6")
    runs = [run_seed("random", compass, seed=s, budget=6) for s in (0, 1)]
    ts = trajectory_set_from_runs(runs, compass.space.direction)
    assert len(ts.values) == 2
    assert all(len(seq) == 2 for seq in ts.values)  # 6 evals in 2 batches of 3
    # minimize: each batch entry is that batch's minimum raw value
    raw = [r.value for r in runs[0].rows]
    assert ts.values[0][0] == min(raw[:3])
    assert ts.values[0][1] == min(raw[3:6])


def test_trajectory_set_rejects_ragged_seeds():
    compass = _compass("hartmann6")
    runs = [
        run_seed("random", compass, seed=0, budget=6),
        run_seed("random", compass, seed=1, budget=9),
    ]
    with pytest.raises(ValueError, match="ragged"):
        trajectory_set_from_runs(runs, compass.space.direction)


def test_rows_to_trajectory_set_groups_by_seed(tmp_path):
    compass = _compass("hartmann6")
    runs = [run_seed("random", compass, seed=s, budget=6) for s in (0, 1)]
    rows = [r for run in runs for r in run.rows]
    ts = rows_to_trajectory_set(rows, compass.space.direction)
    direct = trajectory_set_from_runs(runs, compass.space.direction)
    assert ts.values == direct.values


def test_methods_tuple_is_the_public_contract():
    assert METHODS == ("reasoning-bo", "vanilla-bo", "analytic-ei", "cma-es", "random")
