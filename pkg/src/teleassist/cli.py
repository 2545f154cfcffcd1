"""Command-line front door: single trials, batch tables, goal-graph tooling,
log replay, and the live socket service."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .behaviors import AssistMode
from .harness import TrialConfig, TrialLog, compute_metrics, run_batch, run_trial
from .planner import CostTable, GoalLibrary, PlannerError, ged_cached
from .scene_graph import SceneGraphError, graph_from_json, graph_to_json

MODES = tuple(m.value for m in AssistMode)


def _add_common(p: argparse.ArgumentParser, batch: bool = False) -> None:
    if batch:
        p.add_argument("--task", default=None, help="comma-separated task labels (default: every shipped task)")
        p.add_argument("--mode", default=",".join(MODES), help="comma-separated assist modes")
        p.add_argument("--seeds", type=int, default=5, help="number of seeds, 0..N-1")
    else:
        p.add_argument("--task", required=True, help="task label, e.g. arch")
        p.add_argument("--mode", choices=MODES, default="m3")
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-pos", type=float, default=0.0, metavar="M", help="operator position noise sigma")
    p.add_argument("--noise-rot", type=float, default=0.0, metavar="DEG", help="operator rotation noise sigma")
    p.add_argument("--time-limit", type=float, default=90.0, metavar="S")
    p.add_argument("--out", type=Path, default=Path("."), metavar="DIR")
    p.add_argument("--goals", type=Path, default=None, metavar="DIR", help="goal library root (default: shipped)")
    p.add_argument("--weights", type=Path, default=None, metavar="FILE", help="learned intention weights")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teleassist", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one headless trial; writes a tick log and a metrics file")
    _add_common(p)

    p = sub.add_parser("batch", help="tasks x modes x seeds grid; writes a summary table")
    _add_common(p, batch=True)

    p = sub.add_parser("validate-goals", help="round-trip every shipped goal graph through its file form")
    p.add_argument("--goals", type=Path, default=None, metavar="DIR")

    p = sub.add_parser("ged", help="edit distance and edit path between two goal-graph files")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)

    p = sub.add_parser("replay", help="re-run a recorded log through the wire session and compare metrics")
    p.add_argument("log", type=Path)
    p.add_argument("--goals", type=Path, default=None, metavar="DIR")
    p.add_argument("--weights", type=Path, default=None, metavar="FILE")

    p = sub.add_parser("serve", help="socket service for the companion UI")
    _add_common(p)
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", type=Path, default=None, metavar="DIR", help="UI bundle to serve at /")
    p.add_argument("--logs", type=Path, default=None, metavar="DIR", help="write finished trial logs here")
    return parser


def _library(parser: argparse.ArgumentParser, goals: Path | None) -> GoalLibrary:
    try:
        return GoalLibrary.from_directory(goals) if goals else GoalLibrary.builtin()
    except (PlannerError, SceneGraphError) as exc:
        parser.error(str(exc))


def _weights(parser: argparse.ArgumentParser, path: Path | None):
    if path is None:
        return None
    from .intention import ModelWeights

    try:
        return ModelWeights.load(path)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot load weights: {exc}")


def _config(parser: argparse.ArgumentParser, args, lib: GoalLibrary) -> TrialConfig:
    if args.task not in lib.available_labels:
        parser.error(f"unknown task {args.task!r} (available: {', '.join(lib.available_labels)})")
    return TrialConfig(
        task=args.task,
        mode=AssistMode(args.mode),
        seed=args.seed,
        sigma_pos=args.noise_pos,
        sigma_rot_deg=args.noise_rot,
        time_limit=args.time_limit,
    )


def _metrics_obj(m) -> dict:
    def num(x):
        return None if isinstance(x, float) and math.isnan(x) else x

    return {
        "time": m.time,
        "success": m.success,
        "progress": m.progress,
        "position_error": num(m.position_error),
        "orientation_error_deg": num(m.orientation_error_deg),
    }


def _cmd_run(parser, args) -> int:
    lib = _library(parser, args.goals)
    cfg = _config(parser, args, lib)
    log = run_trial(cfg, lib, _weights(parser, args.weights))
    metrics = compute_metrics(log, lib)
    args.out.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.task}_{cfg.mode.value}_s{cfg.seed}"
    log_path = args.out / f"{stem}.log.jsonl"
    metrics_path = args.out / f"{stem}.metrics.json"
    log.write(log_path)
    metrics_path.write_text(json.dumps(_metrics_obj(metrics), indent=2) + "\n")
    print(f"log      {log_path}")
    print(f"metrics  {metrics_path}")
    print(
        f"success={str(metrics.success).lower()} time={metrics.time:.2f}s "
        f"progress={metrics.progress:.2f} pos={metrics.position_error:.4f} "
        f"ori={metrics.orientation_error_deg:.2f}deg"
    )
    return 0


def _cmd_batch(parser, args) -> int:
    lib = _library(parser, args.goals)
    tasks = args.task.split(",") if args.task else list(lib.available_labels)
    for t in tasks:
        if t not in lib.available_labels:
            parser.error(f"unknown task {t!r} (available: {', '.join(lib.available_labels)})")
    modes = args.mode.split(",")
    for m in modes:
        if m not in MODES:
            parser.error(f"unknown mode {m!r} (available: {', '.join(MODES)})")
    if args.seeds < 1:
        parser.error("--seeds must be at least 1")
    res = run_batch(
        tasks,
        modes,
        range(args.seeds),
        sigma_pos=args.noise_pos,
        sigma_rot_deg=args.noise_rot,
        time_limit=args.time_limit,
        lib=lib,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    out_path = args.out / "batch.json"
    out_path.write_text(json.dumps(res, indent=2) + "\n")
    hdr = f"{'task':<16}{'mode':<6}{'succ':>6}{'time':>8}{'prog':>7}{'pos':>9}{'ori':>8}"
    print(hdr)
    print("-" * len(hdr))
    for row in res["rows"]:
        print(
            f"{row['task']:<16}{row['mode']:<6}{row['success_rate']:>6.2f}{row['time']:>8.2f}"
            f"{row['progress']:>7.2f}{row['position_error']:>9.4f}{row['orientation_error_deg']:>8.2f}"
        )
    print("-" * len(hdr))
    for mode, agg in res["overall"].items():
        print(
            f"{'overall':<16}{mode:<6}{agg['success_rate']:>6.2f}{agg['time']:>8.2f}"
            f"{agg['progress']:>7.2f}{agg['position_error']:>9.4f}{agg['orientation_error_deg']:>8.2f}"
        )
    print(f"wrote {out_path}")
    return 0


def _cmd_validate_goals(parser, args) -> int:
    lib = _library(parser, args.goals)
    failures = 0
    for label in lib.available_labels:
        for i, g in enumerate(lib.variants_of(label)):
            back = graph_from_json(graph_to_json(g))
            ok = (
                list(back.node_ids) == list(g.node_ids)
                and all(back.pose_of(n).approx_equal(g.pose_of(n)) for n in g.node_ids)
                and sorted(e.key() for e in back.edges) == sorted(e.key() for e in g.edges)
                and ged_cached(back, g, CostTable())[0] == 0.0
            )
            print(f"{label}[{i}]: {'ok' if ok else 'FAIL'} ({len(g)} nodes, {len(g.edges)} edges)")
            failures += 0 if ok else 1
    if failures:
        print(f"{failures} goal graph(s) failed round-trip", file=sys.stderr)
    return 1 if failures else 0


def _cmd_ged(parser, args) -> int:
    try:
        a = graph_from_json(args.a.read_text())
        b = graph_from_json(args.b.read_text())
    except (OSError, SceneGraphError) as exc:
        parser.error(str(exc))
    d, path = ged_cached(a, b, CostTable())
    print(f"{d:g}")
    for op in path.ops:
        if op.node is not None:
            print(f"  {op.kind.value} {op.node}")
        else:
            attr = f" {list(op.attr.as_list())}" if op.attr is not None else ""
            print(f"  {op.kind.value} {op.parent}-{op.child}{attr}")
    return 0


def _cmd_replay(parser, args) -> int:
    from .harness import HarnessError
    from .service import replay_log

    lib = _library(parser, args.goals)
    try:
        log = TrialLog.read(args.log)
        replayed = replay_log(log, lib, _weights(parser, args.weights))
    except (OSError, HarnessError) as exc:
        parser.error(str(exc))
    direct = compute_metrics(log, lib)
    same = direct == replayed
    print(f"recorded  {json.dumps(_metrics_obj(direct))}")
    print(f"replayed  {json.dumps(_metrics_obj(replayed))}")
    print(f"identical {str(same).lower()}")
    return 0 if same else 1


def _cmd_serve(parser, args) -> int:
    from .service import serve

    lib = _library(parser, args.goals)
    cfg = _config(parser, args, lib)
    if args.static is not None and not args.static.is_dir():
        parser.error(f"static directory {args.static} does not exist")
    if args.logs is not None:
        args.logs.mkdir(parents=True, exist_ok=True)
    print(f"serving task={cfg.task} mode={cfg.mode.value} on ws://{args.host}:{args.port}/ws")
    serve(
        cfg,
        port=args.port,
        host=args.host,
        lib=lib,
        weights=_weights(parser, args.weights),
        static_dir=args.static,
        log_dir=None if args.logs is None else str(args.logs),
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {
        "run": _cmd_run,
        "batch": _cmd_batch,
        "validate-goals": _cmd_validate_goals,
        "ged": _cmd_ged,
        "replay": _cmd_replay,
        "serve": _cmd_serve,
    }[args.command]
    return handler(parser, args)


if __name__ == "__main__":
    sys.exit(main())
