"""Objective functions: synthetic families, tabular lookups, external evaluators."""

from __future__ import annotations

import csv
import json
import math
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from reasonbo.core import (
    CATEGORICAL,
    CONTINUOUS,
    MAXIMIZE,
    MINIMIZE,
    ParameterSpec,
    PointAssignment,
    SearchSpace,
    require_valid_point,
)


class DomainError(ValueError):
    """Input lies outside the function's declared search box."""


class TableLoadError(ValueError):
    """CSV table inconsistent with its declared space."""


class MissingCombinationError(KeyError):
    """Assignment not present in the lookup table; tables are never interpolated."""


class EvaluatorTimeout(RuntimeError):
    pass


class EvaluatorProtocolError(RuntimeError):
    """External evaluator replied with something other than {"value": real}."""


def _check_box(x, bounds: Sequence[tuple[float, float]], name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float).ravel()
    if v.shape[0] != len(bounds):
        raise DomainError(f"{name} expects {len(bounds)} coordinates, got {v.shape[0]}")
    for i, (lo, hi) in enumerate(bounds):
        if not (lo <= v[i] <= hi):
            raise DomainError(f"{name} coordinate {i + 1} = {v[i]!r} outside [{lo}, {hi}]")
    return v


LEVY_BOUNDS = tuple(((-10.0, 10.0),) * 5)
HARTMANN6_BOUNDS = tuple(((0.0, 1.0),) * 6)
ACKLEY_BOUND = 32.768
ROSENBROCK_BOUNDS = tuple(((-5.0, 10.0),) * 3)

HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
HARTMANN6_P = 1e-4 * np.array([
    [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
    [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
    [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
    [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
])
HARTMANN6_XSTAR = (0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573)


def eval_levy(x) -> float:
    v = _check_box(x, LEVY_BOUNDS, "levy5")
    w = 1.0 + (v - 1.0) / 4.0
    head = math.sin(math.pi * w[0]) ** 2
    mid = float(np.sum((w[:-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(math.pi * w[:-1] + 1.0) ** 2)))
    # the w_1 term belongs to the middle sum, the head term stands apart
    tail = (w[-1] - 1.0) ** 2 * (1.0 + math.sin(2.0 * math.pi * w[-1]) ** 2)
    return head + mid + tail


def eval_hartmann6(x) -> float:
    v = _check_box(x, HARTMANN6_BOUNDS, "hartmann6")
    inner = np.sum(HARTMANN6_A * (v[None, :] - HARTMANN6_P) ** 2, axis=1)
    return float(-np.sum(HARTMANN6_ALPHA * np.exp(-inner)))


def eval_ackley(x) -> float:
    v = np.asarray(x, dtype=float).ravel()
    d = v.shape[0]
    if d < 1:
        raise DomainError("ackley expects at least 1 coordinate")
    _check_box(v, ((-ACKLEY_BOUND, ACKLEY_BOUND),) * d, f"ackley{d}")
    term1 = -20.0 * math.exp(-0.2 * math.sqrt(float(np.sum(v * v)) / d))
    term2 = -math.exp(float(np.sum(np.cos(2.0 * math.pi * v))) / d)
    return term1 + term2 + 20.0 + math.e


def eval_rosenbrock(x) -> float:
    v = _check_box(x, ROSENBROCK_BOUNDS, "rosenbrock3")
    return float(np.sum(100.0 * (v[1:] - v[:-1] ** 2) ** 2 + (1.0 - v[:-1]) ** 2))


@dataclass(frozen=True)
class SyntheticFunction:
    name: str
    dimension: int
    bounds: tuple[tuple[float, float], ...]
    f_star: float
    x_star: tuple[float, ...] | None
    fn: Callable[[Sequence[float]], float]

    def __call__(self, x) -> float:
        return self.fn(x)


SYNTHETIC: dict[str, SyntheticFunction] = {
    "levy5": SyntheticFunction("levy5", 5, LEVY_BOUNDS, 0.0, (1.0,) * 5, eval_levy),
    "hartmann6": SyntheticFunction(
        "hartmann6", 6, HARTMANN6_BOUNDS, -3.32237, HARTMANN6_XSTAR, eval_hartmann6
    ),
    "ackley2": SyntheticFunction(
        "ackley2", 2, ((-ACKLEY_BOUND, ACKLEY_BOUND),) * 2, 0.0, (0.0, 0.0), eval_ackley
    ),
    "ackley15": SyntheticFunction(
        "ackley15", 15, ((-ACKLEY_BOUND, ACKLEY_BOUND),) * 15, 0.0, (0.0,) * 15, eval_ackley
    ),
    "rosenbrock3": SyntheticFunction(
        "rosenbrock3", 3, ROSENBROCK_BOUNDS, 0.0, (1.0, 1.0, 1.0), eval_rosenbrock
    ),
}


def synthetic_space(name: str, direction: str = MINIMIZE) -> SearchSpace:
    fn = SYNTHETIC[name]
    params = tuple(
        ParameterSpec(name=f"x{i + 1}", kind=CONTINUOUS, bounds=b)
        for i, b in enumerate(fn.bounds)
    )
    return SearchSpace(parameters=params, objective_name="objective", direction=direction)


def synthetic_point_evaluator(name: str, direction: str = MINIMIZE):
    """Adapter from PointAssignment (x1..xd) to the vector function.

    A maximize direction negates, so campaigns can treat every benchmark as
    maximization of the reported objective.
    """
    fn = SYNTHETIC[name]

    def evaluate(point: PointAssignment) -> float:
        vec = [float(point.values[f"x{i + 1}"]) for i in range(fn.dimension)]
        val = fn(vec)
        return -val if direction == MAXIMIZE else val

    return evaluate


# ---------------------------------------------------------------------------
# tabular benchmarks

@dataclass(frozen=True)
class TabularBenchmark:
    space: SearchSpace
    rows: Mapping[PointAssignment, float]
    objective_name: str

    def __post_init__(self):
        object.__setattr__(self, "rows", dict(self.rows))


def load_tabular(source: str | Path, space: SearchSpace) -> TabularBenchmark:
    """Parse a full-grid CSV into an exact-match lookup benchmark."""
    path = Path(source)
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        expected = {p.name for p in space.parameters} | {space.objective_name}
        for col in header:
            if col not in expected:
                raise TableLoadError(f"unknown column: {col}")
        for col in sorted(expected):
            if col not in header:
                raise TableLoadError(f"missing column: {col}")
        rows: dict[PointAssignment, float] = {}
        for line_no, raw in enumerate(reader, start=2):
            values: dict[str, float | str] = {}
            for p in space.parameters:
                cell = raw[p.name]
                if p.kind == CATEGORICAL:
                    if cell not in (p.choices or ()):
                        raise TableLoadError(
                            f"line {line_no}: value {cell!r} not a declared choice of {p.name}"
                        )
                    values[p.name] = cell
                else:
                    try:
                        values[p.name] = float(cell)
                    except ValueError:
                        raise TableLoadError(
                            f"line {line_no}: unparseable value {cell!r} in column {p.name}"
                        ) from None
            try:
                objective = float(raw[space.objective_name])
            except ValueError:
                raise TableLoadError(
                    f"line {line_no}: unparseable objective {raw[space.objective_name]!r}"
                ) from None
            point = PointAssignment(values)
            require_valid_point(space, point)
            if point in rows and rows[point] != objective:
                raise TableLoadError(
                    f"conflicting duplicate rows for assignment {dict(point.values)!r}"
                )
            rows[point] = objective
    return TabularBenchmark(space=space, rows=rows, objective_name=space.objective_name)


def lookup_eval(benchmark: TabularBenchmark, point: PointAssignment) -> float:
    require_valid_point(benchmark.space, point)
    try:
        return benchmark.rows[point]
    except KeyError:
        raise MissingCombinationError(
            f"assignment not in table: {dict(point.values)!r}"
        ) from None


# ---------------------------------------------------------------------------
# external evaluators

@dataclass(frozen=True)
class ExternalEvaluatorSpec:
    command: tuple[str, ...] | None = None
    url: str | None = None
    timeout: float = 30.0
    format_version: str = "1"

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if (self.command is None) == (self.url is None):
            raise ValueError("exactly one of command or url must be set")


def _parse_reply(text: str) -> float:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EvaluatorProtocolError(f"reply is not JSON: {text[:200]!r}") from exc
    if not isinstance(doc, dict) or "value" not in doc:
        raise EvaluatorProtocolError(f"reply missing 'value': {text[:200]!r}")
    try:
        value = float(doc["value"])
    except (TypeError, ValueError):
        raise EvaluatorProtocolError(f"'value' not a number: {doc['value']!r}") from None
    if not math.isfinite(value):
        raise EvaluatorProtocolError(f"'value' not finite: {value!r}")
    return value


def external_eval(spec: ExternalEvaluatorSpec, point: PointAssignment) -> float:
    """One request/response exchange: {"parameters": {...}} -> {"value": real}."""
    payload = json.dumps(
        {"parameters": dict(point.values), "version": spec.format_version},
        sort_keys=True,
    )
    if spec.command is not None:
        try:
            proc = subprocess.run(
                list(spec.command),
                input=payload + "\n",
                capture_output=True,
                text=True,
                timeout=spec.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise EvaluatorTimeout(f"evaluator exceeded {spec.timeout}s") from exc
        if proc.returncode != 0:
            raise EvaluatorProtocolError(
                f"evaluator exited {proc.returncode}: {proc.stderr[:200]!r}"
            )
        first_line = proc.stdout.strip().splitlines()
        if not first_line:
            raise EvaluatorProtocolError("evaluator produced no output")
        return _parse_reply(first_line[0])

    import httpx

    try:
        resp = httpx.post(spec.url, content=payload,
                          headers={"content-type": "application/json"},
                          timeout=spec.timeout)
    except httpx.TimeoutException as exc:
        raise EvaluatorTimeout(f"evaluator exceeded {spec.timeout}s") from exc
    if resp.status_code != 200:
        raise EvaluatorProtocolError(f"evaluator returned HTTP {resp.status_code}")
    return _parse_reply(resp.text)
