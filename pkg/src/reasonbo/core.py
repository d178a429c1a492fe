"""Domain model: search spaces, trials, observations, campaign objects.

Everything here is a plain immutable value; campaign progress is made by
producing new ``CampaignState`` instances, never by mutation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

CONTINUOUS = "continuous"
ORDINAL = "discrete-ordinal"
CATEGORICAL = "categorical"

MAXIMIZE = "maximize"
MINIMIZE = "minimize"


class SpaceValidationError(ValueError):
    """A point or compass violates its search-space contract."""


class DimensionMismatch(ValueError):
    """Encoded vector width does not match the space encoding."""


class EmptyDataError(ValueError):
    """An operation that needs data received none."""


@dataclass(frozen=True)
class ParameterSpec:
    """One optimization variable: continuous range, ordinal levels, or choices."""

    name: str
    kind: str
    bounds: tuple[float, float] | None = None
    choices: tuple[str, ...] | None = None
    unit: str | None = None

    def numeric_choices(self) -> tuple[float, ...]:
        assert self.choices is not None
        return tuple(float(c) for c in self.choices)


@dataclass(frozen=True)
class SearchSpace:
    parameters: tuple[ParameterSpec, ...]
    objective_name: str
    direction: str = MAXIMIZE

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))

    def parameter(self, name: str) -> ParameterSpec:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class PointAssignment:
    """One value per parameter: floats for continuous/ordinal, strings for categorical."""

    values: Mapping[str, float | str]

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))

    def key(self) -> tuple:
        """Canonical hashable identity, used for dedupe and replay ordering."""
        return tuple(sorted((k, _norm_value(v)) for k, v in self.values.items()))

    def __eq__(self, other):
        return isinstance(other, PointAssignment) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


def _norm_value(v) -> str:
    if isinstance(v, str):
        return "s:" + v
    return "f:" + repr(float(v))


@dataclass(frozen=True)
class Trial:
    id: str
    round: int
    point: PointAssignment
    origin: str  # llm-init | bo-proposed | llm-selected | manual


@dataclass(frozen=True)
class Observation:
    trial_id: str
    value: float
    recorded_at: str = ""


@dataclass(frozen=True)
class Budget:
    rounds: int = 10
    candidates_per_round: int = 3
    bo_pool_size: int = 5

    @property
    def total_evaluations(self) -> int:
        return self.rounds * self.candidates_per_round


@dataclass(frozen=True)
class ExperimentCompass:
    title: str
    description: str
    space: SearchSpace
    constraints_text: str | None = None
    budget: Budget = field(default_factory=Budget)
    evaluator: dict | None = None  # machine config; never rendered into prompts


@dataclass(frozen=True)
class Hypothesis:
    id: str
    statement: str
    confidence: float
    status: str = "proposed"  # proposed | supported | refuted


@dataclass(frozen=True)
class InsightsObject:
    comments: str = ""
    keywords: tuple[str, ...] = ()
    hypotheses: tuple[Hypothesis, ...] = ()
    candidates: tuple[PointAssignment, ...] = ()


@dataclass(frozen=True)
class CampaignState:
    compass: ExperimentCompass
    trials: tuple[Trial, ...] = ()
    observations: tuple[Observation, ...] = ()
    insight_history: tuple[InsightsObject, ...] = ()
    candidate_pool_history: tuple[tuple[int, tuple[PointAssignment, ...]], ...] = ()
    status: str = "initializing"  # initializing | running | finished

    def with_updates(self, **kw) -> "CampaignState":
        return replace(self, **kw)

    def observed_trials(self) -> list[tuple[Trial, Observation]]:
        """Trials with observations, ordered by (round, trial id)."""
        by_id = {t.id: t for t in self.trials}
        pairs = [(by_id[o.trial_id], o) for o in self.observations
                 if o.trial_id in by_id]
        pairs.sort(key=lambda p: (p[0].round, p[0].id))
        return pairs

    def best_observed(self) -> tuple[Trial, Observation] | None:
        pairs = self.observed_trials()
        if not pairs:
            return None
        direction = self.compass.space.direction
        pick = max if direction == MAXIMIZE else min
        return pick(pairs, key=lambda p: p[1].value)


# ---------------------------------------------------------------------------
# validation

def validate_parameter(p: ParameterSpec) -> list[str]:
    out: list[str] = []
    if not p.name:
        out.append("parameter name empty")
        return out
    if p.kind == CONTINUOUS:
        if p.bounds is None:
            out.append(f"bounds missing: {p.name}")
        elif not (math.isfinite(p.bounds[0]) and math.isfinite(p.bounds[1])):
            out.append(f"bounds not finite: {p.name}")
        elif not (p.bounds[0] < p.bounds[1]):
            out.append(f"bounds degenerate: {p.name}")
        if p.choices:
            out.append(f"choices not allowed on continuous parameter: {p.name}")
    elif p.kind == CATEGORICAL:
        if not p.choices or len(set(p.choices)) < 2:
            out.append(f"categorical needs >=2 distinct choices: {p.name}")
    elif p.kind == ORDINAL:
        if not p.choices:
            out.append(f"ordinal choices missing: {p.name}")
        else:
            try:
                levels = p.numeric_choices()
            except ValueError:
                out.append(f"ordinal choices not numeric: {p.name}")
            else:
                if any(b <= a for a, b in zip(levels, levels[1:])):
                    out.append(f"ordinal choices not strictly increasing: {p.name}")
                if p.bounds is not None and (
                    p.bounds[0] > levels[0] or p.bounds[1] < levels[-1]
                ):
                    out.append(f"bounds exclude ordinal levels: {p.name}")
    else:
        out.append(f"unknown parameter kind: {p.name}")
    return out


def validate_space(space: SearchSpace) -> list[str]:
    out: list[str] = []
    if not space.parameters:
        out.append("space has no parameters")
    names = [p.name for p in space.parameters]
    if len(set(names)) != len(names):
        out.append("duplicate parameter names")
    if space.direction not in (MAXIMIZE, MINIMIZE):
        out.append(f"unknown direction: {space.direction}")
    if not space.objective_name:
        out.append("objective name empty")
    for p in space.parameters:
        out.extend(validate_parameter(p))
    return out


def validate_compass(compass: ExperimentCompass) -> list[str]:
    """Collect invariant violations; empty list means the compass is well-formed."""
    out = validate_space(compass.space)
    b = compass.budget
    if b.rounds <= 0 or b.candidates_per_round <= 0 or b.bo_pool_size <= 0:
        out.append("budget not positive")
    if b.candidates_per_round > b.bo_pool_size:
        out.append("candidates_per_round exceeds bo_pool_size")
    if not compass.title:
        out.append("title empty")
    return out


def validate_point(space: SearchSpace, point: PointAssignment) -> list[str]:
    out: list[str] = []
    names = {p.name for p in space.parameters}
    extra = set(point.values) - names
    missing = names - set(point.values)
    for n in sorted(extra):
        out.append(f"unknown parameter: {n}")
    for n in sorted(missing):
        out.append(f"missing parameter: {n}")
    for p in space.parameters:
        if p.name not in point.values:
            continue
        v = point.values[p.name]
        if p.kind == CATEGORICAL:
            if not isinstance(v, str) or v not in (p.choices or ()):
                out.append(f"value not among choices: {p.name}")
        elif p.kind == ORDINAL:
            try:
                fv = float(v)
            except (TypeError, ValueError):
                out.append(f"value not numeric: {p.name}")
                continue
            levels = p.numeric_choices()
            if not any(abs(fv - lv) <= 1e-12 * max(1.0, abs(lv)) for lv in levels):
                out.append(f"value not an ordinal level: {p.name}")
        else:
            try:
                fv = float(v)
            except (TypeError, ValueError):
                out.append(f"value not numeric: {p.name}")
                continue
            lo, hi = p.bounds  # type: ignore[misc]
            if not (lo <= fv <= hi) or not np.isfinite(fv):
                out.append(f"value out of bounds: {p.name}")
    return out


def require_valid_point(space: SearchSpace, point: PointAssignment) -> None:
    problems = validate_point(space, point)
    if problems:
        raise SpaceValidationError("; ".join(problems))


# ---------------------------------------------------------------------------
# encoding

class SpaceEncoder:
    """Min-max scaling for continuous/ordinal dims, one-hot blocks for categorical.

    Encoded width = #continuous + #ordinal + sum(|choices|) over categoricals.
    """

    def __init__(self, space: SearchSpace):
        self.space = space
        self.width = 0
        self.layout: list[tuple[ParameterSpec, int, int]] = []  # spec, start, size
        for p in space.parameters:
            size = len(p.choices) if p.kind == CATEGORICAL else 1
            self.layout.append((p, self.width, size))
            self.width += size

    def _scalar_bounds(self, p: ParameterSpec) -> tuple[float, float]:
        if p.kind == ORDINAL:
            levels = p.numeric_choices()
            if p.bounds is not None:
                return p.bounds
            return levels[0], levels[-1]
        assert p.bounds is not None
        return p.bounds

    def encode(self, point: PointAssignment) -> np.ndarray:
        require_valid_point(self.space, point)
        vec = np.zeros(self.width)
        for p, start, size in self.layout:
            v = point.values[p.name]
            if p.kind == CATEGORICAL:
                vec[start + p.choices.index(v)] = 1.0  # type: ignore[union-attr]
            else:
                lo, hi = self._scalar_bounds(p)
                vec[start] = (float(v) - lo) / (hi - lo)
        return vec

    def decode(self, vector: Sequence[float]) -> PointAssignment:
        vec = np.asarray(vector, dtype=float)
        if vec.shape != (self.width,):
            raise DimensionMismatch(
                f"expected encoding width {self.width}, got {vec.shape}"
            )
        values: dict[str, float | str] = {}
        for p, start, size in self.layout:
            if p.kind == CATEGORICAL:
                block = vec[start:start + size]
                values[p.name] = p.choices[int(np.argmax(block))]  # type: ignore[index]
            else:
                lo, hi = self._scalar_bounds(p)
                x = lo + min(max(float(vec[start]), 0.0), 1.0) * (hi - lo)
                if p.kind == ORDINAL:
                    levels = p.numeric_choices()
                    gaps = [abs(x - lv) for lv in levels]
                    x = levels[gaps.index(min(gaps))]
                values[p.name] = x
        return PointAssignment(values)

    def encode_many(self, points: Iterable[PointAssignment]) -> np.ndarray:
        rows = [self.encode(p) for p in points]
        if not rows:
            return np.zeros((0, self.width))
        return np.vstack(rows)


def encode_point(space: SearchSpace, point: PointAssignment) -> np.ndarray:
    return SpaceEncoder(space).encode(point)


def decode_point(space: SearchSpace, vector: Sequence[float]) -> PointAssignment:
    return SpaceEncoder(space).decode(vector)


# ---------------------------------------------------------------------------
# trajectories

def best_so_far(values: Sequence[float], direction: str = MAXIMIZE) -> list[float]:
    """Running optimum of an observation sequence ordered by round."""
    if len(values) == 0:
        raise EmptyDataError("best_so_far needs at least one observation")
    out: list[float] = []
    best = values[0]
    better = (lambda a, b: a > b) if direction == MAXIMIZE else (lambda a, b: a < b)
    for v in values:
        if better(v, best):
            best = v
        out.append(best)
    return out


# ---------------------------------------------------------------------------
# compass JSON (schema documented in README)

def compass_to_dict(compass: ExperimentCompass) -> dict:
    params = []
    for p in compass.space.parameters:
        d: dict = {"name": p.name, "kind": p.kind}
        if p.bounds is not None:
            d["bounds"] = list(p.bounds)
        if p.choices is not None:
            d["choices"] = list(p.choices)
        if p.unit:
            d["unit"] = p.unit
        params.append(d)
    doc = {
        "title": compass.title,
        "description": compass.description,
        "objective": {
            "name": compass.space.objective_name,
            "direction": compass.space.direction,
        },
        "parameters": params,
        "constraints": compass.constraints_text,
        "budget": {
            "rounds": compass.budget.rounds,
            "candidates_per_round": compass.budget.candidates_per_round,
            "bo_pool_size": compass.budget.bo_pool_size,
        },
    }
    if compass.evaluator is not None:
        doc["evaluator"] = compass.evaluator
    return doc


def compass_from_dict(doc: Mapping) -> ExperimentCompass:
    params = []
    for d in doc.get("parameters", []):
        params.append(ParameterSpec(
            name=d["name"],
            kind=d["kind"],
            bounds=tuple(d["bounds"]) if d.get("bounds") is not None else None,
            choices=tuple(d["choices"]) if d.get("choices") is not None else None,
            unit=d.get("unit"),
        ))
    obj = doc.get("objective", {})
    space = SearchSpace(
        parameters=tuple(params),
        objective_name=obj.get("name", "objective"),
        direction=obj.get("direction", MAXIMIZE),
    )
    b = doc.get("budget", {})
    budget = Budget(
        rounds=int(b.get("rounds", 10)),
        candidates_per_round=int(b.get("candidates_per_round", 3)),
        bo_pool_size=int(b.get("bo_pool_size", 5)),
    )
    return ExperimentCompass(
        title=doc.get("title", ""),
        description=doc.get("description", ""),
        space=space,
        constraints_text=doc.get("constraints"),
        budget=budget,
        evaluator=doc.get("evaluator"),
    )


def load_compass(path: str | Path) -> ExperimentCompass:
    with open(path, encoding="utf-8") as f:
        return compass_from_dict(json.load(f))


def save_compass(compass: ExperimentCompass, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(compass_to_dict(compass), f, indent=2, sort_keys=True)
        f.write("\n")
