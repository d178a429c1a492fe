"""Objective functions: analytic values, table lookups, the external protocol."""

from __future__ import annotations

import json
import sys
import textwrap

import numpy as np
import pytest

from reasonbo.benchmarks import (
    SYNTHETIC,
    DomainError,
    EvaluatorProtocolError,
    EvaluatorTimeout,
    ExternalEvaluatorSpec,
    MissingCombinationError,
    TableLoadError,
    TabularBenchmark,
    eval_ackley,
    eval_hartmann6,
    eval_levy,
    eval_rosenbrock,
    external_eval,
    load_tabular,
    lookup_eval,
    synthetic_point_evaluator,
    synthetic_space,
)
from reasonbo.core import ParameterSpec, PointAssignment, SearchSpace

# frozen extended-precision evaluations of the printed formulas (50 digits)
LEVY_AT_ORIGIN = 0.988378216467897880755
ACKLEY_AT_ONES_2D = 3.625384938440362826601


def test_levy_minimum_at_ones():
    assert eval_levy([1.0] * 5) == pytest.approx(0.0, abs=1e-12)


def test_levy_at_origin_matches_oracle():
    assert eval_levy([0.0] * 5) == pytest.approx(LEVY_AT_ORIGIN, rel=1e-13)


def test_levy_interior_permutation_symmetry():
    x = [2.5, -3.0, 0.5, 7.0, -1.0]
    y = [2.5, 7.0, -3.0, 0.5, -1.0]
    assert eval_levy(x) == pytest.approx(eval_levy(y), abs=1e-12)


def test_hartmann_minimum_value():
    fn = SYNTHETIC["hartmann6"]
    assert fn(fn.x_star) == pytest.approx(-3.32237, abs=5e-6)


def test_hartmann_bounded_by_alpha_sum():
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = eval_hartmann6(rng.uniform(size=6))
        assert -(1.0 + 1.2 + 3.0 + 3.2) <= v <= 0.0


def test_hartmann_matches_direct_summation():
    from reasonbo.benchmarks import HARTMANN6_A, HARTMANN6_ALPHA, HARTMANN6_P

    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.uniform(size=6)
        total = 0.0
        for i in range(4):
            inner = 0.0
            for j in range(6):
                inner += HARTMANN6_A[i, j] * (x[j] - HARTMANN6_P[i, j]) ** 2
            total -= HARTMANN6_ALPHA[i] * np.exp(-inner)
        assert eval_hartmann6(x) == pytest.approx(total, abs=1e-12)


@pytest.mark.parametrize("d", [2, 15])
def test_ackley_zero_at_origin(d):
    assert eval_ackley([0.0] * d) == pytest.approx(0.0, abs=1e-12)


def test_ackley_oracle_and_even_symmetry():
    assert eval_ackley([1.0, 1.0]) == pytest.approx(ACKLEY_AT_ONES_2D, rel=1e-13)
    x = [3.2, -7.1]
    assert eval_ackley(x) == pytest.approx(eval_ackley([-v for v in x]), abs=1e-12)


def test_rosenbrock_values():
    assert eval_rosenbrock([1.0, 1.0, 1.0]) == 0.0
    assert eval_rosenbrock([0.0, 0.0, 0.0]) == pytest.approx(2.0, abs=1e-14)
    # both banana terms vanish on the parabola x_{i+1} = x_i^2
    assert eval_rosenbrock([1.5, 2.25, 5.0625]) == pytest.approx(1.8125, abs=1e-12)


def test_every_registered_minimum():
    for fn in SYNTHETIC.values():
        if fn.x_star is not None:
            assert fn(fn.x_star) == pytest.approx(fn.f_star, abs=5e-6), fn.name


@pytest.mark.parametrize(
    "call",
    [
        lambda: eval_levy([11.0, 0, 0, 0, 0]),
        lambda: eval_levy([0.0] * 4),
        lambda: eval_hartmann6([0.5] * 5),
        lambda: eval_hartmann6([1.5, 0, 0, 0, 0, 0]),
        lambda: eval_ackley([40.0, 0.0]),
        lambda: eval_rosenbrock([0.0, 0.0, -6.0]),
    ],
)
def test_out_of_domain_raises(call):
    with pytest.raises(DomainError):
        call()


def test_synthetic_space_shapes():
    space = synthetic_space("hartmann6")
    assert len(space.parameters) == 6
    assert all(p.kind == "continuous" for p in space.parameters)
    assert space.parameters[0].bounds == (0.0, 1.0)
    assert space.direction == "minimize"


def test_point_evaluator_adapts_and_negates():
    ev = synthetic_point_evaluator("rosenbrock3")
    p = PointAssignment(values={"x1": 0.0, "x2": 0.0, "x3": 0.0})
    assert ev(p) == pytest.approx(2.0)
    neg = synthetic_point_evaluator("rosenbrock3", direction="maximize")
    assert neg(p) == pytest.approx(-2.0)


def test_shipped_synthetic_compasses_are_anonymized():
    """Descriptions must describe the landscape, not name the function."""
    from importlib import resources

    names = ("levy", "hartmann", "ackley", "rosenbrock")
    pkg = resources.files("reasonbo") / "compasses"
    scanned = 0
    for entry in pkg.iterdir():
        if not entry.name.endswith(".json") or entry.name == "coupling.json":
            continue
        doc = json.loads(entry.read_text(encoding="utf-8"))
        text = (doc["title"] + " " + doc["description"]).lower()
        for banned in names:
            assert banned not in text, (entry.name, banned)
        scanned += 1
    assert scanned >= 4


# ---------------------------------------------------------------------------
# tabular


def _grid_space() -> SearchSpace:
    return SearchSpace(
        parameters=(
            ParameterSpec(name="base", kind="categorical", choices=("KOH", "CsF")),
            ParameterSpec(name="temp", kind="discrete-ordinal", choices=("25", "50", "75")),
        ),
        objective_name="yield",
        direction="maximize",
    )


def _write_grid(tmp_path, rows) -> str:
    path = tmp_path / "grid.csv"
    path.write_text("base,temp,yield\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return str(path)


def test_tabular_load_and_lookup(tmp_path):
    src = _write_grid(tmp_path, [
        "KOH,25,10.0", "KOH,50,20.0", "KOH,75,30.0",
        "CsF,25,40.0", "CsF,50,55.5", "CsF,75,60.0",
    ])
    bench = load_tabular(src, _grid_space())
    assert isinstance(bench, TabularBenchmark)
    assert len(bench.rows) == 6
    got = lookup_eval(bench, PointAssignment(values={"base": "CsF", "temp": 50.0}))
    assert got == 55.5


def test_tabular_missing_combination(tmp_path):
    src = _write_grid(tmp_path, ["KOH,25,10.0"])
    bench = load_tabular(src, _grid_space())
    with pytest.raises(MissingCombinationError):
        lookup_eval(bench, PointAssignment(values={"base": "CsF", "temp": 25.0}))


def test_tabular_unknown_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("base,temp,pressure,yield\nKOH,25,1,10\n", encoding="utf-8")
    with pytest.raises(TableLoadError, match="pressure"):
        load_tabular(str(path), _grid_space())


def test_tabular_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("base,yield\nKOH,10\n", encoding="utf-8")
    with pytest.raises(TableLoadError, match="temp"):
        load_tabular(str(path), _grid_space())


def test_tabular_conflicting_duplicates(tmp_path):
    src = _write_grid(tmp_path, ["KOH,25,10.0", "KOH,25,11.0"])
    with pytest.raises(TableLoadError, match="duplicate"):
        load_tabular(src, _grid_space())


def test_tabular_agreeing_duplicates_are_fine(tmp_path):
    src = _write_grid(tmp_path, ["KOH,25,10.0", "KOH,25,10.0"])
    bench = load_tabular(src, _grid_space())
    assert len(bench.rows) == 1


def test_tabular_unparseable_cell(tmp_path):
    src = _write_grid(tmp_path, ["KOH,warm,10.0"])
    with pytest.raises(TableLoadError, match="warm"):
        load_tabular(src, _grid_space())


def test_tabular_undeclared_choice(tmp_path):
    src = _write_grid(tmp_path, ["NaOH,25,10.0"])
    with pytest.raises(TableLoadError, match="NaOH"):
        load_tabular(src, _grid_space())


def test_lookup_is_case_sensitive(tmp_path):
    src = _write_grid(tmp_path, ["KOH,25,10.0"])
    bench = load_tabular(src, _grid_space())
    with pytest.raises(Exception):
        # "koh" is not a declared choice, so validation rejects it outright
        lookup_eval(bench, PointAssignment(values={"base": "koh", "temp": 25.0}))


def test_packaged_coupling_table_loads():
    from importlib import resources

    from reasonbo.core import load_compass

    compass_path = resources.files("reasonbo") / "compasses" / "coupling.json"
    compass = load_compass(str(compass_path))
    csv_path = resources.files("reasonbo") / "fixtures" / "coupling_yields.csv"
    bench = load_tabular(str(csv_path), compass.space)
    assert len(bench.rows) == 36
    assert max(bench.rows.values()) == 85.5


# ---------------------------------------------------------------------------
# external evaluator protocol


def _echo_script(tmp_path) -> str:
    """Child-process evaluator: replies with the sum of numeric parameters."""
    path = tmp_path / "echo_eval.py"
    path.write_text(textwrap.dedent("""\
        import json, sys
        req = json.loads(sys.stdin.readline())
        total = sum(v for v in req["parameters"].values()
                    if isinstance(v, (int, float)))
        print(json.dumps({"value": total}))
    """), encoding="utf-8")
    return str(path)


def test_external_echo_evaluator(tmp_path):
    spec = ExternalEvaluatorSpec(command=(sys.executable, _echo_script(tmp_path)))
    point = PointAssignment(values={"x1": 1.5, "x2": 2.25, "tag": "A"})
    assert external_eval(spec, point) == pytest.approx(3.75)


def test_external_timeout(tmp_path):
    path = tmp_path / "sleepy.py"
    path.write_text("import time; time.sleep(5)\n", encoding="utf-8")
    spec = ExternalEvaluatorSpec(command=(sys.executable, str(path)), timeout=0.2)
    with pytest.raises(EvaluatorTimeout):
        external_eval(spec, PointAssignment(values={"x1": 0.0}))


def test_external_malformed_reply(tmp_path):
    path = tmp_path / "garbage.py"
    path.write_text("print('not json at all')\n", encoding="utf-8")
    spec = ExternalEvaluatorSpec(command=(sys.executable, str(path)))
    with pytest.raises(EvaluatorProtocolError):
        external_eval(spec, PointAssignment(values={"x1": 0.0}))


def test_external_missing_value_key(tmp_path):
    path = tmp_path / "wrongkey.py"
    path.write_text("print('{\"result\": 3}')\n", encoding="utf-8")
    spec = ExternalEvaluatorSpec(command=(sys.executable, str(path)))
    with pytest.raises(EvaluatorProtocolError, match="value"):
        external_eval(spec, PointAssignment(values={"x1": 0.0}))


def test_external_nonzero_exit(tmp_path):
    path = tmp_path / "dies.py"
    path.write_text("import sys; sys.exit(3)\n", encoding="utf-8")
    spec = ExternalEvaluatorSpec(command=(sys.executable, str(path)))
    with pytest.raises(EvaluatorProtocolError, match="3"):
        external_eval(spec, PointAssignment(values={"x1": 0.0}))


def test_external_nonfinite_value_rejected(tmp_path):
    path = tmp_path / "nan.py"
    path.write_text("print('{\"value\": NaN}')\n", encoding="utf-8")
    spec = ExternalEvaluatorSpec(command=(sys.executable, str(path)))
    with pytest.raises(EvaluatorProtocolError):
        external_eval(spec, PointAssignment(values={"x1": 0.0}))


def test_spec_validation():
    with pytest.raises(ValueError):
        ExternalEvaluatorSpec(command=("x",), url="http://y")
    with pytest.raises(ValueError):
        ExternalEvaluatorSpec()
    with pytest.raises(ValueError):
        ExternalEvaluatorSpec(command=("x",), timeout=0.0)
