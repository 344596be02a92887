"""Headless driver: project init, imports, batch execution, export, serving."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import WorkbenchError
from .export import export_html
from .model import (
    OriginDescriptor,
    OriginMethod,
    OutputKind,
    Project,
    load_project,
    save_project,
)
from .session import Session

DEFAULT_PROJECT = "project.mmw.json"
DEFAULT_PORT = 8787


def _load(path: Path) -> Project:
    return load_project(path.read_bytes())


def cmd_init(args: argparse.Namespace) -> int:
    target = Path(args.dir)
    target.mkdir(parents=True, exist_ok=True)
    path = target / DEFAULT_PROJECT
    if path.exists():
        print(f"refusing to overwrite existing {path}", file=sys.stderr)
        return 1
    project = Project.new(args.name or target.resolve().name)
    path.write_bytes(save_project(project))
    print(f"initialized {path}")
    return 0


def cmd_import(args: argparse.Namespace) -> int:
    path = Path(args.project)
    try:
        project = _load(path)
    except (OSError, WorkbenchError) as exc:
        print(f"cannot load project: {exc}", file=sys.stderr)
        return 2
    session = Session(project)
    origin = OriginDescriptor(method=OriginMethod.coerce(args.origin),
                              participant=args.participant)
    source_path = Path(args.file)
    name = args.name or source_path.stem
    try:
        source = session.import_source(args.kind, name, source_path.read_bytes(), origin)
    except OSError as exc:
        print(f"cannot read {source_path}: {exc}", file=sys.stderr)
        return 1
    except WorkbenchError as exc:
        print(f"import failed: {exc}", file=sys.stderr)
        return 1
    path.write_bytes(save_project(project))
    print(f"imported {source.kind.value} source {source.name!r} as {source.id}")
    return 0


def run_headless(project_path: Path, json_mode: bool = False) -> int:
    """Execute all cells, apply sync to all blocks, save. Exit 0 on success,
    1 when any cell errored (all cells still attempted), 2 on load failure."""
    try:
        original = project_path.read_bytes()
        project = load_project(original)
    except (OSError, WorkbenchError) as exc:
        if json_mode:
            print(json.dumps({"status": "load_failed", "error": str(exc)}))
        else:
            print(f"cannot load project: {exc}", file=sys.stderr)
        return 2

    session = Session(project)
    results = session.execute_all()
    report = []
    failed = 0
    for cell_id, outputs in results.items():
        errors = [o for o in outputs if o.kind is OutputKind.error]
        if errors:
            failed += 1
            report.append({"cell": cell_id, "status": "error",
                           "error": errors[0].payload.get("message", "")})
        else:
            report.append({"cell": cell_id, "status": "ok", "outputs": len(outputs)})

    data = save_project(project)
    if data != original:
        project_path.write_bytes(data)

    if json_mode:
        print(json.dumps({"status": "error" if failed else "ok", "cells": report}))
    else:
        for item in report:
            if item["status"] == "ok":
                print(f"cell {item['cell']}: ok ({item['outputs']} outputs)")
            else:
                print(f"cell {item['cell']}: ERROR {item['error']}")
        print(f"{len(report)} cells, {failed} failed")
    return 1 if failed else 0


def cmd_run(args: argparse.Namespace) -> int:
    return run_headless(Path(args.project), json_mode=args.json)


def cmd_export(args: argparse.Namespace) -> int:
    path = Path(args.project)
    try:
        project = _load(path)
    except (OSError, WorkbenchError) as exc:
        print(f"cannot load project: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    try:
        if args.format == "html":
            out.write_text(export_html(project), encoding="utf-8")
        else:
            out.write_bytes(save_project(project))
    except OSError as exc:
        print(f"cannot write {out}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import Registry, create_app

    path = Path(args.project)
    registry = Registry()
    if path.exists():
        try:
            registry.add_project(_load(path))
        except WorkbenchError as exc:
            print(f"cannot load project: {exc}", file=sys.stderr)
            return 2
    app = create_app(registry)
    if args.ui:
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=args.ui, html=True), name="ui")
    # single-user local service: loopback only
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmw", description="mixed-methods analysis workbench")
    parser.add_argument("--project", default=DEFAULT_PROJECT,
                        help=f"project file (default {DEFAULT_PROJECT})")
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init", help="create a new project")
    p_init.add_argument("dir")
    p_init.add_argument("--name", default=None)
    p_init.set_defaults(func=cmd_init)

    p_import = sub.add_parser("import", help="import a text or table source")
    p_import.add_argument("--kind", choices=["text", "table"], required=True)
    p_import.add_argument("--origin", default="other",
                          help="interview|focus_group|survey|log|other")
    p_import.add_argument("--participant", default=None)
    p_import.add_argument("--name", default=None)
    p_import.add_argument("file")
    p_import.set_defaults(func=cmd_import)

    p_run = sub.add_parser("run", help="execute all cells, sync blocks, save")
    p_run.add_argument("--json", action="store_true",
                       help="machine-readable status on stdout")
    p_run.set_defaults(func=cmd_run)

    p_export = sub.add_parser("export", help="write a static report")
    p_export.add_argument("--format", choices=["html", "json"], default="html")
    p_export.add_argument("--out", required=True)
    p_export.set_defaults(func=cmd_export)

    p_serve = sub.add_parser("serve", help="serve the HTTP API")
    p_serve.add_argument("--port", type=int, default=DEFAULT_PORT)
    p_serve.add_argument("--ui", default=None, help="static UI directory to mount at /ui")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
