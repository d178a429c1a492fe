"""Random-search baseline; CMA-ES lives in cmaes and is re-exported here."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from reasonbo.cmaes import (  # noqa: F401  (re-exported baseline surface)
    CmaState,
    CmaStateError,
    cma_ask,
    cma_init,
    cma_tell,
    default_population,
)
from reasonbo.core import CATEGORICAL, CONTINUOUS, PointAssignment, SearchSpace


@dataclass(frozen=True)
class RandomSearchState:
    seed: int
    draws_made: int = 0


def random_point(space: SearchSpace, rng: np.random.Generator) -> PointAssignment:
    values: dict[str, float | str] = {}
    for p in space.parameters:
        if p.kind == CONTINUOUS:
            lo, hi = p.bounds
            values[p.name] = float(rng.uniform(lo, hi))
        elif p.kind == CATEGORICAL:
            values[p.name] = p.choices[int(rng.integers(len(p.choices)))]
        else:
            levels = p.numeric_choices()
            values[p.name] = levels[int(rng.integers(len(levels)))]
    return PointAssignment(values)


def random_ask(
    state: RandomSearchState, space: SearchSpace, n: int
) -> tuple[list[PointAssignment], RandomSearchState]:
    """n i.i.d. uniform draws; the returned state advances the stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([state.seed, state.draws_made]))
    points = [random_point(space, rng) for _ in range(n)]
    return points, replace(state, draws_made=state.draws_made + n)
