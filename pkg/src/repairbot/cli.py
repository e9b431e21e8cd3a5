"""Command-line entry points: scan, reproduce, repair, run, serve, stats."""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
from datetime import timedelta
from pathlib import Path
from typing import Optional, Sequence

from .archive import export_report, read_archive, compute_statistics
from .feeds import open_feed
from .model import ts_from_str, ts_to_str, utc_now
from .repair import BUILTIN_TOOLS, ExternalToolSpec, ToolRegistry
from .reproducer import Reproducer, Timeouts
from .scanner import DEFAULT_WINDOW_HOURS
from .service import PipelineService, RunConfig, load_catalog

WORKDIR_ENV = "REPAIRBOT_WORKDIR"


def default_workdir() -> Path:
    return Path(os.environ.get(WORKDIR_ENV, "repairbot-workdir"))


def _add_feed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--feed", required=True,
                        help="feed locator: fixture directory or live base URL")


def _add_workdir(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--workdir", type=Path, default=None,
                        help=f"workspace root (default ${WORKDIR_ENV} or ./repairbot-workdir)")


def _registry(args: argparse.Namespace) -> ToolRegistry:
    external = tuple(
        ExternalToolSpec(name=entry.split("=", 1)[0],
                         command=tuple(entry.split("=", 1)[1].split()))
        for entry in (args.external_tool or [])
    )
    builtin = tuple(BUILTIN_TOOLS)
    if args.tools:
        wanted = [t.strip() for t in args.tools.split(",") if t.strip()]
        builtin = tuple(t for t in wanted if t in BUILTIN_TOOLS)
        external = tuple(spec for spec in external if spec.name in wanted)
    return ToolRegistry(builtin=builtin, external=external)


def _window(args: argparse.Namespace) -> tuple:
    if getattr(args, "window_start", None) and getattr(args, "window_end", None):
        return ts_from_str(args.window_start), ts_from_str(args.window_end)
    now = ts_from_str(args.now) if getattr(args, "now", None) else utc_now()
    hours = getattr(args, "window_hours", DEFAULT_WINDOW_HOURS)
    return now - timedelta(hours=hours), now + timedelta(seconds=1)


def _config(args: argparse.Namespace, mode: str = "oneshot") -> RunConfig:
    workdir = args.workdir or default_workdir()
    return RunConfig(
        feed_locator=args.feed,
        archive_path=Path(args.archive),
        workdir=workdir,
        notify_dir=getattr(args, "notify_dir", None),
        catalog_path=getattr(args, "catalog", None),
        interval=timedelta(hours=getattr(args, "interval_hours", DEFAULT_WINDOW_HOURS)),
        mode=mode,
        workers=getattr(args, "workers", 4),
        registry=_registry(args),
        max_patches=getattr(args, "max_patches", 50),
        keep_workspaces=getattr(args, "keep_workspace", False),
        api_token=getattr(args, "token", None),
    )


def cmd_scan(args: argparse.Namespace) -> int:
    feed = open_feed(args.feed)
    from .scanner import is_interesting

    start, end = _window(args)
    catalog_slugs = None
    if args.catalog:
        catalog_slugs = {p.slug for p in load_catalog(args.catalog)}
    lines = []
    diagnostics: list[str] = []
    for build in feed.list_recent_builds(start, end):
        if catalog_slugs is not None and build.project.slug not in catalog_slugs:
            continue
        hit = is_interesting(
            build, feed.fetch_log(build.build_id),
            now=end, window=end - start,
            metadata_failing=feed.failing_test_hint(build.build_id),
            diagnostics=diagnostics,
        )
        if hit is not None:
            lines.append(json.dumps({
                "build_id": build.build_id,
                "project": build.project.slug,
                "failing_tests": hit.failing_test_count,
                "evidence": hit.evidence,
                "finished_at": ts_to_str(build.finished_at),
            }, sort_keys=True))
    output = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(output)
    else:
        sys.stdout.write(output)
    for diag in diagnostics:
        print(f"note: {diag}", file=sys.stderr)
    return 0


def cmd_reproduce(args: argparse.Namespace) -> int:
    feed = open_feed(args.feed)
    build = feed.build(args.build)
    workdir = (args.workdir or default_workdir()) / "workspaces"
    reproducer = Reproducer(
        feed, workdir,
        timeouts=Timeouts(compile=args.timeout_compile),
        keep_all=args.keep_workspace,
    )
    attempt = reproducer.reproduce(build)
    print(json.dumps({
        **attempt.result.to_payload(),
        "steps": [{"step": s.step.value, "status": s.status.value, "detail": s.detail}
                  for s in attempt.steps],
        "workspace_kept": attempt.workspace is not None,
    }, indent=2, sort_keys=True))
    return 0 if attempt.result.outcome.value == "reproduced" else 1


def cmd_repair(args: argparse.Namespace) -> int:
    from .repair import repair_program

    feed = open_feed(args.feed)
    build = feed.build(args.build)
    workdir = (args.workdir or default_workdir()) / "workspaces"
    reproducer = Reproducer(feed, workdir)
    attempt = reproducer.reproduce(build)
    if attempt.result.outcome.value != "reproduced" or attempt.workspace is None:
        print(json.dumps({"error": f"build did not reproduce: {attempt.result.outcome.value}"}))
        return 1
    adapter = reproducer.adapters[build.project.build_tool_tag]
    program = adapter.load_program(attempt.workspace)
    outcome = repair_program(
        program, build_id=build.build_id,
        registry=_registry(args), max_patches=args.max_patches,
        workspace=attempt.workspace,
    )
    print(json.dumps({
        "build_id": build.build_id,
        "tools_run": outcome.tools_run,
        "patches": [
            {
                "patch_id": p.candidate.patch_id,
                "tool": p.candidate.tool_name,
                "adequate": p.candidate.adequate,
                "flags": sorted(f.value for f in p.candidate.overfitting_flags),
                "note": p.note,
                "diff": p.candidate.edit,
            }
            for p in outcome.patches
        ],
        "diagnostics": outcome.diagnostics,
    }, indent=2, sort_keys=True))
    reproducer.release(attempt)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    service = PipelineService(_config(args, mode="oneshot"))
    start, end = _window(args)
    stats = service.run_once(start, end)
    print(json.dumps(stats.to_payload(), indent=2, sort_keys=True))
    service.close()
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    mode = "periodic" if not args.api_only else "hook"
    service = PipelineService(_config(args, mode=mode))
    static_dir = Path(args.static) if args.static else None
    app = create_app(service, static_dir=static_dir)
    stop = threading.Event()
    scheduler: Optional[threading.Thread] = None
    if not args.api_only:
        scheduler = threading.Thread(
            target=service.run_periodic, kwargs={"stop": stop}, daemon=True)
        scheduler.start()
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        stop.set()
        if scheduler is not None:
            scheduler.join(timeout=5)
        service.close()
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    records = read_archive(Path(args.archive))
    start = end = None
    if args.window:
        raw_start, _, raw_end = args.window.partition("..")
        start = ts_from_str(raw_start) if raw_start else None
        end = ts_from_str(raw_end) if raw_end else None
    stats = compute_statistics(records, start, end)
    sys.stdout.write(export_report(stats, args.format))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repairbot",
        description="Autonomous repair pipeline for failing CI builds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="list interesting builds in a window")
    _add_feed(p)
    p.add_argument("--catalog", type=Path, default=None)
    p.add_argument("--window-hours", type=float, default=DEFAULT_WINDOW_HOURS)
    p.add_argument("--now", default=None, help="scan anchored at this ISO timestamp")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("reproduce", help="reproduce one build locally")
    _add_feed(p)
    _add_workdir(p)
    p.add_argument("--build", required=True)
    p.add_argument("--keep-workspace", action="store_true")
    p.add_argument("--timeout-compile", type=float, default=1800.0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("repair", help="reproduce then attempt repair on one build")
    _add_feed(p)
    _add_workdir(p)
    p.add_argument("--build", required=True)
    p.add_argument("--tools", default=None, help="csv of tool names to run")
    p.add_argument("--external-tool", action="append", default=[],
                   metavar="NAME=CMD", help="register an external tool")
    p.add_argument("--max-patches", type=int, default=50)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("run", help="one full scan+repair pass over a window")
    _add_feed(p)
    _add_workdir(p)
    p.add_argument("--archive", required=True)
    p.add_argument("--catalog", type=Path, default=None)
    p.add_argument("--notify-dir", type=Path, default=None)
    p.add_argument("--window-start", default=None)
    p.add_argument("--window-end", default=None)
    p.add_argument("--now", default=None)
    p.add_argument("--window-hours", type=float, default=DEFAULT_WINDOW_HOURS)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--tools", default=None)
    p.add_argument("--external-tool", action="append", default=[])
    p.add_argument("--max-patches", type=int, default=50)
    p.add_argument("--keep-workspace", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="periodic scheduler plus the triage API")
    _add_feed(p)
    _add_workdir(p)
    p.add_argument("--archive", required=True)
    p.add_argument("--catalog", type=Path, default=None)
    p.add_argument("--notify-dir", type=Path, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--interval-hours", type=float, default=DEFAULT_WINDOW_HOURS)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--tools", default=None)
    p.add_argument("--external-tool", action="append", default=[])
    p.add_argument("--max-patches", type=int, default=50)
    p.add_argument("--api-only", action="store_true",
                   help="serve the API without the periodic scheduler")
    p.add_argument("--static", default=None, help="dashboard asset directory")
    p.add_argument("--token", default=None, help="require X-Auth-Token header")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("stats", help="render table reports from an archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--window", default=None, metavar="START..END")
    p.add_argument("--format", choices=("csv", "doc"), default="csv")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
