"""LogEI acquisition family and the candidate-pool optimizer.

All acquisition math is maximize-oriented and works in the surrogate's
standardized target units; callers handling minimize objectives negate
targets before fitting.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx  # noqa: F401  (public re-export)

from reasonbo._kernels import log_h
from reasonbo.core import (
    CATEGORICAL,
    CONTINUOUS,
    ORDINAL,
    PointAssignment,
    SearchSpace,
    SpaceEncoder,
)
from reasonbo.gp import GPModel, predict_standardized

DEFAULT_TAU0 = 1e-6
DEFAULT_TAU_MAX = 1e-2
ENUMERATION_LIMIT = 10_000
MIN_PATTERN_STEP = 1.0 / 1024.0


@dataclass(frozen=True)
class AcquisitionConfig:
    kind: str = "qlogei"  # qlogei | analytic-logei
    tau0: float = DEFAULT_TAU0
    tau_max: float = DEFAULT_TAU_MAX
    mc_samples: int = 128
    incumbent: float | None = None  # standardized units; None derives from model
    epsilon_branch: float = float(np.finfo(float).eps)


@dataclass(frozen=True)
class CandidatePool:
    round: int
    points: tuple[PointAssignment, ...]
    acquisition_values: tuple[float, ...]
    short_pool: bool = False


# ---------------------------------------------------------------------------
# stable scalar building blocks

def log1mexp(x):
    """log(1 - exp(x)) for x < 0, stable on both sides of -log 2."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr >= 0.0):
        raise ValueError("log1mexp requires x < 0")
    out = np.empty_like(arr)
    upper = arr > -math.log(2.0)
    out[upper] = np.log(-np.expm1(arr[upper]))
    out[~upper] = np.log1p(-np.exp(arr[~upper]))
    return float(out) if np.isscalar(x) else out


def logsoftplus(x, tau: float = 1.0):
    """log(tau * log(1 + exp(x / tau))), finite over the whole real line."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    u = np.asarray(x, dtype=float) / tau
    out = np.empty_like(u)
    hi = u > 36.0
    lo = u <= -36.0
    mid = ~(hi | lo)
    out[hi] = np.log(u[hi] + np.log1p(np.exp(-u[hi])))
    out[mid] = np.log(np.log1p(np.exp(u[mid])))
    out[lo] = u[lo]
    out += math.log(tau)
    return float(out) if np.isscalar(x) else out


def _logsumexp_sorted(values: np.ndarray) -> float:
    """logsumexp over a 1-D array, summed in sorted order.

    Sorting before summation makes the result exactly invariant under any
    permutation of the inputs.
    """
    v = np.sort(np.asarray(values, dtype=float))
    m = v[-1]
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(v - m))))


def _logsumexp_sorted_rows(matrix: np.ndarray) -> np.ndarray:
    v = np.sort(matrix, axis=1)
    m = v[:, -1]
    out = m + np.log(np.sum(np.exp(v - m[:, None]), axis=1))
    return np.where(np.isfinite(m), out, m)


def _logsumexp_sorted_cols(matrix: np.ndarray) -> np.ndarray:
    v = np.sort(matrix, axis=0)
    m = v[-1, :]
    out = m + np.log(np.sum(np.exp(v - m[None, :]), axis=0))
    return np.where(np.isfinite(m), out, m)


# ---------------------------------------------------------------------------
# acquisition values

def analytic_logei(prediction, incumbent: float) -> float:
    """log EI of a Gaussian posterior: log_h((mu - y*) / sigma) + log sigma."""
    mean = float(prediction.mean)
    std = float(prediction.std)
    if std <= 0.0:
        gap = mean - incumbent
        return math.log(gap) if gap > 0 else -math.inf
    return float(log_h((mean - incumbent) / std)) + math.log(std)


def analytic_logei_values(means: np.ndarray, stds: np.ndarray,
                          incumbent: float) -> np.ndarray:
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    out = np.full(means.shape, -np.inf)
    pos = stds > 0.0
    if np.any(pos):
        z = (means[pos] - incumbent) / stds[pos]
        out[pos] = log_h(z) + np.log(stds[pos])
    degenerate = ~pos & (means > incumbent)
    if np.any(degenerate):
        out[degenerate] = np.log(means[degenerate] - incumbent)
    return out


def qlogei(samples: np.ndarray, incumbent: float,
           tau0: float = DEFAULT_TAU0, tau_max: float = DEFAULT_TAU_MAX) -> float:
    """Monte Carlo batch LogEI over posterior draws.

    samples has shape (n_samples, q); a 1-D input is treated as q=1. The
    value is the log-mean-exp over draws of the tau_max smooth-max over
    candidates of logsoftplus_tau0(draw - incumbent).
    """
    xi = np.asarray(samples, dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None]
    if xi.size == 0:
        raise ValueError("samples must be nonempty")
    v = logsoftplus(xi - incumbent, tau0)
    inner = tau_max * _logsumexp_sorted_rows(v / tau_max)
    return _logsumexp_sorted(inner) - math.log(xi.shape[0])


def incumbent_from_model(model: GPModel) -> float:
    return float(np.max(model.targets_std))


# ---------------------------------------------------------------------------
# pool optimization

@dataclass(frozen=True)
class _Layout:
    continuous: tuple[int, ...]
    ordinals: tuple[tuple[int, tuple[float, ...]], ...]  # offset, scaled levels
    categoricals: tuple[tuple[int, int], ...]  # start, size


def _search_layout(encoder: SpaceEncoder) -> _Layout:
    cont: list[int] = []
    ords: list[tuple[int, tuple[float, ...]]] = []
    cats: list[tuple[int, int]] = []
    for p, start, size in encoder.layout:
        if p.kind == CONTINUOUS:
            cont.append(start)
        elif p.kind == ORDINAL:
            lo, hi = encoder._scalar_bounds(p)
            levels = tuple((lv - lo) / (hi - lo) for lv in p.numeric_choices())
            ords.append((start, levels))
        elif p.kind == CATEGORICAL:
            cats.append((start, size))
    return _Layout(tuple(cont), tuple(ords), tuple(cats))


def _make_scorer(model: GPModel, config: AcquisitionConfig, rng: np.random.Generator):
    incumbent = config.incumbent
    if incumbent is None:
        incumbent = incumbent_from_model(model)
    if config.kind == "analytic-logei":
        def score(rows: np.ndarray) -> np.ndarray:
            means, stds = predict_standardized(model, rows)
            return analytic_logei_values(means, stds, incumbent)
        return score
    if config.kind != "qlogei":
        raise ValueError(f"unknown acquisition kind: {config.kind}")
    # common random numbers: one base draw reused at every query point keeps
    # the Monte Carlo surface deterministic for the local search
    z_base = rng.standard_normal(config.mc_samples)
    log_n = math.log(config.mc_samples)

    def score(rows: np.ndarray) -> np.ndarray:
        means, stds = predict_standardized(model, rows)
        draws = means[None, :] + stds[None, :] * z_base[:, None]
        v = logsoftplus(draws - incumbent, config.tau0)
        return _logsumexp_sorted_cols(v) - log_n

    return score


def _random_encoded(layout: _Layout, width: int, rng: np.random.Generator) -> np.ndarray:
    x = np.zeros(width)
    for off in layout.continuous:
        x[off] = rng.uniform()
    for off, levels in layout.ordinals:
        x[off] = levels[rng.integers(len(levels))]
    for start, size in layout.categoricals:
        x[start + rng.integers(size)] = 1.0
    return x


def _neighbors(x: np.ndarray, layout: _Layout, step: float) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for off in layout.continuous:
        for delta in (step, -step):
            nx = x.copy()
            nx[off] = min(max(nx[off] + delta, 0.0), 1.0)
            if nx[off] != x[off]:
                out.append(nx)
    for off, levels in layout.ordinals:
        gaps = [abs(x[off] - lv) for lv in levels]
        idx = gaps.index(min(gaps))
        for j in (idx - 1, idx + 1):
            if 0 <= j < len(levels):
                nx = x.copy()
                nx[off] = levels[j]
                out.append(nx)
    for start, size in layout.categoricals:
        cur = int(np.argmax(x[start:start + size]))
        for j in range(size):
            if j != cur:
                nx = x.copy()
                nx[start:start + size] = 0.0
                nx[start + j] = 1.0
                out.append(nx)
    return out


def _local_search(x0: np.ndarray, score, layout: _Layout,
                  max_iters: int = 500) -> tuple[np.ndarray, float]:
    """Pattern search on continuous dims plus greedy discrete swaps."""
    x = x0.copy()
    val = float(score(x[None, :])[0])
    step = 0.25
    for _ in range(max_iters):
        if step < MIN_PATTERN_STEP:
            break
        moves = _neighbors(x, layout, step)
        if not moves:
            break
        vals = score(np.vstack(moves))
        k = int(np.argmax(vals))
        if vals[k] > val:
            x, val = moves[k], float(vals[k])
        else:
            step *= 0.5
    return x, val


def _enumerate_rows(encoder: SpaceEncoder, layout: _Layout) -> np.ndarray | None:
    """All encoded points of a fully discrete space, or None if too many."""
    if layout.continuous:
        return None
    total = 1
    options_per_block: list[list[tuple[int, ...]]] = []
    # each option is (offset, ...) describing which entries to set; value layout
    # differs between ordinal (scalar level) and categorical (one-hot index)
    blocks: list[list[tuple[str, int, float | int]]] = []
    for p, start, size in encoder.layout:
        if p.kind == ORDINAL:
            off, levels = next(o for o in layout.ordinals if o[0] == start)
            blocks.append([("scalar", start, lv) for lv in levels])
            total *= len(levels)
        else:
            blocks.append([("onehot", start, j) for j in range(size)])
            total *= size
        if total > ENUMERATION_LIMIT:
            return None
    rows = np.zeros((total, encoder.width))
    for i, combo in enumerate(itertools.product(*blocks)):
        for kind, start, v in combo:
            if kind == "scalar":
                rows[i, start] = v
            else:
                rows[i, start + int(v)] = 1.0
    return rows


def optimize_acquisition(
    model: GPModel,
    space: SearchSpace,
    config: AcquisitionConfig,
    pool_size: int,
    restarts: int = 8,
    seed=0,
    round_index: int = -1,
) -> CandidatePool:
    """Propose pool_size distinct points ranked by acquisition value.

    Fully discrete spaces small enough to enumerate are scored exhaustively;
    otherwise multi-start local search from seeded random initial points,
    with one start at the best observed training point.
    """
    encoder = SpaceEncoder(space)
    if encoder.width != model.dim:
        raise ValueError(
            f"space encodes to width {encoder.width}, model has width {model.dim}"
        )
    layout = _search_layout(encoder)
    rng = np.random.default_rng(seed)
    score = _make_scorer(model, config, rng)

    grid = _enumerate_rows(encoder, layout)
    if grid is not None:
        scored: dict[tuple, tuple[float, PointAssignment]] = {}
        for row, val in zip(grid, score(grid)):
            point = encoder.decode(row)
            key = point.key()
            prev = scored.get(key)
            if prev is None or val > prev[0]:
                scored[key] = (float(val), point)
        top = sorted(scored.values(), key=lambda t: (-t[0], t[1].key()))[:pool_size]
        return CandidatePool(
            round=round_index,
            points=tuple(p for _, p in top),
            acquisition_values=tuple(v for v, _ in top),
            short_pool=len(top) < pool_size,
        )

    # Searched spaces: every start is refined by local search and the pool is
    # the top pool_size distinct endpoints ranked by acquisition value. One
    # start sits at the best observed training point, the rest are uniform.
    best_idx = int(np.argmax(model.targets_std))
    incumbent_row = model.inputs[best_idx].copy()
    found: dict[tuple, tuple[float, PointAssignment]] = {}

    def note(row: np.ndarray, val: float) -> None:
        point = encoder.decode(row)
        key = point.key()
        prev = found.get(key)
        if prev is None or val > prev[0]:
            found[key] = (float(val), point)

    starts = [incumbent_row]
    for _ in range(max(restarts - 1, 1)):
        starts.append(_random_encoded(layout, encoder.width, rng))
    for x0 in starts:
        x_end, v_end = _local_search(x0, score, layout)
        note(x_end, v_end)

    # searches can collapse onto few basins; pad with scored random probes
    attempts = 0
    while len(found) < pool_size and attempts < 200:
        probe = _random_encoded(layout, encoder.width, rng)
        note(probe, float(score(probe[None, :])[0]))
        attempts += 1

    top = sorted(found.values(), key=lambda t: (-t[0], t[1].key()))[:pool_size]
    return CandidatePool(
        round=round_index,
        points=tuple(p for _, p in top),
        acquisition_values=tuple(v for v, _ in top),
        short_pool=len(top) < pool_size,
    )
