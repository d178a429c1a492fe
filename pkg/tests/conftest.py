from __future__ import annotations

import pytest

from reasonbo.core import (
    Budget,
    ExperimentCompass,
    ParameterSpec,
    SearchSpace,
)


def make_mixed_space() -> SearchSpace:
    return SearchSpace(
        parameters=(
            ParameterSpec(name="temperature", kind="continuous", bounds=(20.0, 100.0)),
            ParameterSpec(name="equivalents", kind="discrete-ordinal",
                          choices=("1.0", "1.5", "2.0", "3.0")),
            ParameterSpec(name="catalyst", kind="categorical",
                          choices=("Pd-A", "Pd-B", "Ni-C")),
        ),
        objective_name="yield",
        direction="maximize",
    )


def make_continuous_space(dim: int = 2, lo: float = 0.0, hi: float = 1.0,
                          direction: str = "minimize") -> SearchSpace:
    return SearchSpace(
        parameters=tuple(
            ParameterSpec(name=f"x{i + 1}", kind="continuous", bounds=(lo, hi))
            for i in range(dim)
        ),
        objective_name="loss",
        direction=direction,
    )


def make_categorical_space() -> SearchSpace:
    """3 x 4 x 2 grid, small enough to enumerate exhaustively."""
    return SearchSpace(
        parameters=(
            ParameterSpec(name="metal", kind="categorical", choices=("Pd", "Ni", "Cu")),
            ParameterSpec(name="ligand", kind="categorical",
                          choices=("L1", "L2", "L3", "L4")),
            ParameterSpec(name="solvent", kind="categorical", choices=("DMF", "THF")),
        ),
        objective_name="yield",
        direction="maximize",
    )


@pytest.fixture
def mixed_space() -> SearchSpace:
    return make_mixed_space()


@pytest.fixture
def mixed_compass(mixed_space) -> ExperimentCompass:
    return ExperimentCompass(
        title="Mixed-variable screening",
        description="Tune one temperature, one stoichiometry level, and a catalyst.",
        space=mixed_space,
        budget=Budget(rounds=4, candidates_per_round=3, bo_pool_size=5),
    )
