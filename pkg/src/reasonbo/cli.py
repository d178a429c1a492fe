"""Command line entry points: run, bench, serve."""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
from pathlib import Path

from reasonbo.backends import (
    ENV_MODEL,
    BackendUnavailable,
    HttpChatBackend,
    ScriptedBackend,
)
from reasonbo.core import ExperimentCompass, load_compass
from reasonbo.events import EventLog, LogicalClock
from reasonbo.knowledge import HashedEmbedder, KnowledgeStore
from reasonbo.metrics import compute_metrics, render_report, with_default_reference
from reasonbo.runners import (
    METHODS,
    SeedRun,
    read_trajectory_csv,
    rows_to_trajectory_set,
    run_seed,
    trajectory_set_from_runs,
    write_trajectory_csv,
)

KNOWN_OPTIMA = {
    "levy5": 0.0,
    "hartmann6": -3.32237,
    "ackley2": 0.0,
    "ackley15": 0.0,
    "rosenbrock3": 0.0,
}

DEFAULT_BENCH_METHODS = ("vanilla-bo", "analytic-ei", "cma-es", "random")


def parse_seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:  # allow a leading minus sign
            lo_text, hi_text = part.rsplit("-", 1)
            lo, hi = int(lo_text), int(hi_text)
            if hi < lo:
                raise ValueError(f"bad seed range: {part}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def resolve_compass(ref: str) -> tuple[ExperimentCompass, Path | None]:
    """A filesystem path, or the name of a packaged compass."""
    path = Path(ref)
    if path.exists():
        return load_compass(path), path.parent
    packaged = importlib.resources.files("reasonbo") / "compasses" / f"{ref}.json"
    if packaged.is_file():
        return load_compass(packaged), None
    raise FileNotFoundError(
        f"compass not found: {ref!r} is neither a file nor a packaged compass"
    )


def make_backend_factory(args):
    """Returns a zero-arg callable producing a fresh backend per campaign."""
    scripted = getattr(args, "scripted", None)
    backend_url = getattr(args, "backend_url", None)
    if scripted:
        transcript = json.loads(Path(scripted).read_text(encoding="utf-8"))
        return lambda: ScriptedBackend(transcript)
    if backend_url:
        model = os.environ.get(ENV_MODEL, "default")
        return lambda: HttpChatBackend(base_url=backend_url, model=model)
    try:
        env_backend = HttpChatBackend.from_env()
    except BackendUnavailable:
        return None
    return lambda: env_backend


def _fresh(path: Path) -> Path:
    if path.exists():
        path.unlink()
    return path


def _run_one_seed(
    method: str,
    compass: ExperimentCompass,
    seed: int,
    budget: int | None,
    backend_factory,
    out_dir: Path | None,
    tag: str,
) -> SeedRun:
    event_log = None
    store = None
    if out_dir is not None:
        event_log = EventLog(
            _fresh(out_dir / f"events-{tag}-seed{seed}.jsonl"), clock=LogicalClock()
        )
        if method == "reasoning-bo":
            store = KnowledgeStore(
                HashedEmbedder(),
                path=_fresh(out_dir / f"knowledge-{tag}-seed{seed}.jsonl"),
            )
    backend = None
    if method == "reasoning-bo" and backend_factory is not None:
        backend = backend_factory()
    return run_seed(
        method, compass, seed,
        budget=budget, backend=backend, event_log=event_log, store=store,
    )


def cmd_run(args) -> int:
    compass, _ = resolve_compass(args.compass)
    seeds = parse_seeds(args.seeds)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    backend_factory = make_backend_factory(args)
    if args.method == "reasoning-bo" and backend_factory is None:
        print("note: no backend configured; reasoning is degraded to plain "
              "surrogate optimization", file=sys.stderr)

    tag = args.method
    runs: list[SeedRun] = []
    for seed in seeds:
        run = _run_one_seed(
            args.method, compass, seed, args.budget, backend_factory, out_dir, tag
        )
        runs.append(run)
        write_trajectory_csv(out_dir / f"trajectory-{tag}-seed{seed}.csv", run.rows)
        if run.result is not None:
            text = "\n\n".join([
                "# Campaign summary",
                run.result.summary,
                run.result.confidence_table,
                "# Conclusion",
                run.result.conclusion,
            ])
            (out_dir / f"report-{tag}-seed{seed}.md").write_text(
                text + "\n", encoding="utf-8"
            )
        final = run.rows[-1].best_so_far if run.rows else float("nan")
        print(f"{tag} seed={seed}: {len(run.rows)} evaluations, "
              f"final best {final:.6g}")
    return 0


def _bench_label(ref: str) -> str:
    path = Path(ref)
    return path.stem if path.exists() else ref


def cmd_bench(args) -> int:
    methods = []
    for chunk in args.methods.split(","):
        chunk = chunk.strip()
        if chunk:
            if chunk not in METHODS:
                print(f"error: unknown method: {chunk!r}", file=sys.stderr)
                return 2
            methods.append(chunk)
    seeds = parse_seeds(args.seeds)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    backend_factory = make_backend_factory(args)

    combined: list[str] = []
    for ref in args.compass:
        label = _bench_label(ref)
        compass, _ = resolve_compass(ref)
        f_star = KNOWN_OPTIMA.get(label)
        sets = {}
        for method in methods:
            cell_path = out_dir / f"traj-{label}-{method}.csv"
            if args.resume and cell_path.exists():
                rows = read_trajectory_csv(cell_path)
                print(f"[{label}] {method}: resumed from {cell_path.name}")
                sets[method] = rows_to_trajectory_set(
                    rows, compass.space.direction, f_star=f_star
                )
                continue
            runs = [
                _run_one_seed(method, compass, seed, args.budget,
                              backend_factory, None, f"{label}-{method}")
                for seed in seeds
            ]
            all_rows = [row for run in runs for row in run.rows]
            write_trajectory_csv(cell_path, all_rows)
            print(f"[{label}] {method}: {len(seeds)} seeds done")
            sets[method] = trajectory_set_from_runs(
                runs, compass.space.direction, f_star=f_star
            )
        sets = with_default_reference(sets)
        reports = {m: compute_metrics(ts, lenient_cv=True) for m, ts in sets.items()}
        markdown = render_report(reports, format="markdown")
        (out_dir / f"report-{label}.md").write_text(markdown + "\n", encoding="utf-8")
        (out_dir / f"report-{label}.csv").write_text(
            render_report(reports, format="csv") + "\n", encoding="utf-8"
        )
        combined.append(f"## {label}\n\n{markdown}")
    (out_dir / "report.md").write_text("\n\n".join(combined) + "\n", encoding="utf-8")
    print(f"reports written to {out_dir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from reasonbo.service import create_app

    backend_factory = make_backend_factory(args)
    backend = backend_factory() if backend_factory is not None else None
    app = create_app(args.state_dir, backend=backend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reasonbo",
        description="Reasoning-augmented Bayesian experiment campaigns",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one method over a compass")
    run_p.add_argument("--compass", required=True,
                       help="compass JSON path or packaged compass name")
    run_p.add_argument("--method", required=True, choices=METHODS)
    run_p.add_argument("--seeds", default="0", help="e.g. 0,1,2 or 0-9")
    run_p.add_argument("--budget", type=int, default=None,
                       help="override total evaluations")
    run_p.add_argument("--backend-url", default=None,
                       help="OpenAI-compatible chat endpoint base URL")
    run_p.add_argument("--scripted", default=None,
                       help="JSON transcript file for a scripted backend")
    run_p.add_argument("--out", default="runs", help="output directory")
    run_p.set_defaults(func=cmd_run)

    bench_p = sub.add_parser("bench", help="cross-product benchmark table")
    bench_p.add_argument("--compass", action="append", required=True,
                         help="compass path or packaged name (repeatable)")
    bench_p.add_argument("--methods", default=",".join(DEFAULT_BENCH_METHODS),
                         help="comma-separated method list")
    bench_p.add_argument("--seeds", default="0-9")
    bench_p.add_argument("--budget", type=int, default=None)
    bench_p.add_argument("--backend-url", default=None)
    bench_p.add_argument("--scripted", default=None)
    bench_p.add_argument("--out", default="bench", help="output directory")
    bench_p.add_argument("--resume", action="store_true",
                         help="skip cells whose trajectory CSV already exists")
    bench_p.set_defaults(func=cmd_bench)

    serve_p = sub.add_parser("serve", help="start the ask-tell HTTP service")
    serve_p.add_argument("--port", type=int, default=8080)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--state-dir", default="service-state")
    serve_p.add_argument("--backend-url", default=None)
    serve_p.add_argument("--scripted", default=None)
    serve_p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
