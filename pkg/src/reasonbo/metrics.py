"""Multi-seed trajectory metrics and the cross-method comparison report."""

from __future__ import annotations

import io
import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from reasonbo.core import MAXIMIZE, MINIMIZE, best_so_far

DEFAULT_CVAR_LEVELS = (0.1, 0.3, 0.5)
DEFAULT_IMP_HORIZONS = (1, 3, 5)

COLUMNS = (
    "CV", "Std", "Log Regret", "Log AUC",
    "CVaR@0.1", "CVaR@0.3", "CVaR@0.5",
    "IMP@1", "IMP@3", "IMP@5",
)

UNAVAILABLE = "—"


class UndefinedMetricError(ValueError):
    """Requested metric is undefined for these trajectories (e.g. CV at mean <= 0)."""


@dataclass(frozen=True)
class TrajectorySet:
    """Per-seed, per-batch raw objective values; best-so-far applied internally."""

    values: tuple[tuple[float, ...], ...]
    direction: str = MAXIMIZE
    f_star: float | None = None
    lower_ref: float | None = None

    def __post_init__(self):
        vals = tuple(tuple(float(v) for v in seq) for seq in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 1:
            raise ValueError("need at least one seed")
        lengths = {len(seq) for seq in vals}
        if len(lengths) != 1:
            raise ValueError(f"ragged trajectories: lengths {sorted(lengths)}")
        if 0 in lengths:
            raise ValueError("trajectories must be nonempty")

    @property
    def n_seeds(self) -> int:
        return len(self.values)

    @property
    def n_batches(self) -> int:
        return len(self.values[0])

    def best_matrix(self) -> np.ndarray:
        return np.array([best_so_far(list(seq), self.direction) for seq in self.values])


def collapse_batches(values: list[float], batch_sizes: list[int]) -> list[float]:
    """Per-batch raw series: the best value observed inside each batch."""
    if sum(batch_sizes) != len(values):
        raise ValueError("batch sizes do not cover the value sequence")
    out: list[float] = []
    i = 0
    for size in batch_sizes:
        out.append(max(values[i:i + size]))
        i += size
    return out


def collapse_batches_min(values: list[float], batch_sizes: list[int]) -> list[float]:
    if sum(batch_sizes) != len(values):
        raise ValueError("batch sizes do not cover the value sequence")
    out: list[float] = []
    i = 0
    for size in batch_sizes:
        out.append(min(values[i:i + size]))
        i += size
    return out


@dataclass(frozen=True)
class MetricReport:
    direction: str
    cv: float | None
    std: float
    log_regret: float | None
    log_auc: float | None
    cvar: dict[float, float]
    imp: dict[int, float | None]


def _log_or_neg_inf(total: float) -> float:
    if total < 0:
        return math.nan
    if total == 0:
        return -math.inf
    return math.log(total)


def compute_metrics(
    tset: TrajectorySet,
    cvar_levels: tuple[float, ...] = DEFAULT_CVAR_LEVELS,
    imp_horizons: tuple[int, ...] = DEFAULT_IMP_HORIZONS,
    lenient_cv: bool = False,
) -> MetricReport:
    """All Table-style metrics over per-seed best-so-far trajectories.

    Dispersion (Std, CV, CVaR) is over per-seed final bests. LogRegret needs a
    known optimum f_star; LogAUC needs a lower (maximize) or upper (minimize)
    reference; both render as unavailable when the reference is missing.
    """
    best = tset.best_matrix()  # (seeds, batches)
    finals = best[:, -1]
    maximize = tset.direction == MAXIMIZE

    std = float(np.std(finals))
    mean_final = float(np.mean(finals))
    cv: float | None
    if mean_final > 0:
        cv = std / mean_final
    elif lenient_cv:
        cv = None
    else:
        raise UndefinedMetricError(
            f"CV undefined: mean of final bests is {mean_final:g} (must be > 0)"
        )

    log_regret: float | None = None
    if tset.f_star is not None:
        gaps = (tset.f_star - best) if maximize else (best - tset.f_star)
        log_regret = _log_or_neg_inf(float(np.mean(np.sum(gaps, axis=1))))

    log_auc: float | None = None
    if tset.lower_ref is not None:
        areas = (best - tset.lower_ref) if maximize else (tset.lower_ref - best)
        log_auc = _log_or_neg_inf(float(np.mean(np.sum(areas, axis=1))))

    n_seeds = tset.n_seeds
    cvar: dict[float, float] = {}
    ordered = np.sort(finals) if maximize else np.sort(finals)[::-1]  # worst first
    for level in cvar_levels:
        if not (0.0 < level <= 1.0):
            raise ValueError(f"CVaR level must be in (0, 1], got {level}")
        count = math.ceil(level * n_seeds)
        cvar[level] = float(np.mean(ordered[:count]))

    imp: dict[int, float | None] = {}
    for alpha in imp_horizons:
        if alpha < 1:
            raise ValueError(f"IMP horizon must be >= 1, got {alpha}")
        imp[alpha] = float(np.mean(best[:, alpha - 1])) if alpha <= tset.n_batches else None
    return MetricReport(
        direction=tset.direction,
        cv=cv,
        std=std,
        log_regret=log_regret,
        log_auc=log_auc,
        cvar=cvar,
        imp=imp,
    )


def with_default_reference(sets: dict[str, TrajectorySet]) -> dict[str, TrajectorySet]:
    """Fill missing LogAUC references with a shared cross-method bound."""
    out: dict[str, TrajectorySet] = {}
    all_vals = [v for ts in sets.values() for seq in ts.values for v in seq]
    directions = {ts.direction for ts in sets.values()}
    if len(directions) != 1:
        raise ValueError("methods compare only within a single direction")
    maximize = directions.pop() == MAXIMIZE
    ref = (min(all_vals) - 1e-9) if maximize else (max(all_vals) + 1e-9)
    for name, ts in sets.items():
        out[name] = ts if ts.lower_ref is not None else replace(ts, lower_ref=ref)
    return out


# ---------------------------------------------------------------------------
# report rendering

def _cells(report: MetricReport) -> list[float | None]:
    return [
        report.cv,
        report.std,
        report.log_regret,
        report.log_auc,
        report.cvar.get(0.1),
        report.cvar.get(0.3),
        report.cvar.get(0.5),
        report.imp.get(1),
        report.imp.get(3),
        report.imp.get(5),
    ]


def _better(column: str, direction: str):
    maximize = direction == MAXIMIZE
    if column in ("CV", "Std", "Log Regret"):
        return min
    if column == "Log AUC":
        return max
    # CVaR and IMP follow the optimization direction
    return max if maximize else min


def render_report(reports: dict[str, MetricReport], format: str = "markdown") -> str:
    if not reports:
        raise ValueError("need at least one method")
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(("Method",) + COLUMNS)
        for name, report in reports.items():
            row = [name]
            for cell in _cells(report):
                row.append("" if cell is None else repr(float(cell)))
            writer.writerow(row)
        return buf.getvalue()
    if format != "markdown":
        raise ValueError(f"unknown format: {format}")

    direction = next(iter(reports.values())).direction
    table = {name: _cells(r) for name, r in reports.items()}
    best_per_col: list[float | None] = []
    for j, col in enumerate(COLUMNS):
        present = [cells[j] for cells in table.values()
                   if cells[j] is not None and math.isfinite(cells[j])]
        best_per_col.append(_better(col, direction)(present) if present else None)

    lines = ["| Method | " + " | ".join(COLUMNS) + " |",
             "|" + "---|" * (len(COLUMNS) + 1)]
    for name, cells in table.items():
        rendered = []
        for j, cell in enumerate(cells):
            if cell is None:
                rendered.append(UNAVAILABLE)
            else:
                text = f"{cell:.6g}"
                if best_per_col[j] is not None and cell == best_per_col[j]:
                    text = f"**{text}**"
                rendered.append(text)
        lines.append(f"| {name} | " + " | ".join(rendered) + " |")
    return "\n".join(lines) + "\n"


def parse_report_csv(document: str) -> dict[str, list[float | None]]:
    """Inverse of the csv format; cell lists follow the report column order."""
    reader = csv.reader(io.StringIO(document))
    header = next(reader)
    if tuple(header[1:]) != COLUMNS:
        raise ValueError("unexpected report columns")
    out: dict[str, list[float | None]] = {}
    for row in reader:
        out[row[0]] = [None if cell == "" else float(cell) for cell in row[1:]]
    return out
