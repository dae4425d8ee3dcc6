"""``beamplan`` command line.

Exit codes: 0 success, 1 error diagnostics (or warnings under
``--strict``), 2 unreadable input, parse or catalog failure, bad usage.
Diagnostics go to standard error, one per line.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from . import diagnostics as dg
from .components import Catalog, bundled_catalog, load_catalog
from .errors import BeamplanError, CatalogError, ParseError
from .exporters import (
    dump_scene, export_bom, export_drill_drawing, export_stl, export_svg, plate_filenames, render_bom,
)
from .layout import compile_document, format_document, load_document

FORMATS = ("stl", "svg", "bom", "drill", "scene")
BUNDLED_PREFIX = "bundled:"
EXAMPLES_DIR = Path(__file__).parent / "data" / "examples"


class UsageError(Exception):
    pass


def _doc_path(text: str) -> Path:
    if text.startswith(BUNDLED_PREFIX):
        return EXAMPLES_DIR / text[len(BUNDLED_PREFIX):]
    return Path(text)


def resolve_catalog(flags: list[str] | None, env: dict | None = None) -> Catalog:
    """``--catalog`` files, else ``BEAMPLAN_CATALOG_PATH``, else the bundled catalog."""
    env = os.environ if env is None else env
    if flags:
        return load_catalog(flags)
    value = env.get("BEAMPLAN_CATALOG_PATH", "")
    paths = [p for p in value.split(os.pathsep) if p]
    if paths:
        return load_catalog(paths)
    return bundled_catalog()


def _compile(args):
    path = _doc_path(args.document)
    if not path.is_file():
        raise UsageError(f"cannot read {args.document}")
    doc = load_document(path)
    return compile_document(doc, resolve_catalog(args.catalog))


def _report(scene, strict: bool) -> int:
    failed = False
    for d in scene.diagnostics:
        if strict and d.severity == "warning":
            d = dg.Diagnostic("error", d.code, d.message, d.subject)
        failed |= d.is_error
        print(d.format(), file=sys.stderr)
    return 1 if failed else 0


def _out_file(out: str | None, doc: str, suffix: str) -> Path:
    stem = _doc_path(doc).stem
    if out is None:
        return Path(f"{stem}{suffix}")
    p = Path(out)
    if out.endswith(("/", os.sep)) or p.is_dir() or not p.suffix:
        return p / f"{stem}{suffix}"
    return p


def cmd_compile(args) -> int:
    scene = _compile(args)
    code = _report(scene, args.strict)
    if code == 0 or args.force:
        dump_scene(scene, _out_file(args.out, args.document, ".scene.json"))
    return code


def cmd_check(args) -> int:
    return _report(_compile(args), args.strict)


def cmd_export(args) -> int:
    if args.format not in FORMATS:
        raise UsageError(f"unknown format {args.format!r} (choose from {', '.join(FORMATS)})")
    scene = _compile(args)
    code = _report(scene, args.strict)
    if code and not args.force:
        return code
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "scene":
        dump_scene(scene, out / f"{_doc_path(args.document).stem}.scene.json")
        return code
    ext = {"stl": "stl", "svg": "svg", "bom": "csv", "drill": "drill.svg"}[args.format]
    for name, fname in plate_filenames(scene, ext).items():
        if args.format == "stl":
            export_stl(scene, out / fname, plate=name)
        elif args.format == "svg":
            export_svg(scene, out / fname, plate=name)
        elif args.format == "bom":
            export_bom(scene, out / fname, plate=name)
        else:
            export_drill_drawing(scene, out / fname, plate=name)
    return code


def cmd_bom(args) -> int:
    scene = _compile(args)
    code = _report(scene, args.strict)
    if args.out:
        export_bom(scene, args.out)
    else:
        sys.stdout.write(render_bom(scene))
    return code


def cmd_report(args) -> int:
    from .report import write_report

    scene = _compile(args)
    code = _report(scene, args.strict)
    write_report(scene, args.out)
    export_svg(scene, Path(args.out) / "table.svg")
    return code


def cmd_catalog(args) -> int:
    cat = resolve_catalog(args.catalog)
    if args.show:
        spec = cat.spec(args.show)
        print(describe_spec(spec))
        return 0
    if args.types:
        for tid in cat.optic_type_ids():
            t = cat.optic_type(tid)
            roles = ", ".join(f"{r}={b.component}" + (f"+{b.mount}" if b.mount else "") for r, b in sorted(t.roles.items()))
            print(f"{tid}  scale={t.scale:g}  {roles}")
        return 0
    for cid in cat.ids():
        print(cid)
    return 0


def describe_spec(spec) -> str:
    lines = [f"id: {spec.id}"]
    if spec.description:
        lines.append(f"description: {spec.description}")
    fp = spec.footprint
    lines.append(f"footprint: {type(fp).__name__.lower()} " + " ".join(f"{k}={v:g}" for k, v in vars(fp).items()))
    lines.append(f"behavior: {spec.behavior!r}")
    oc = spec.optical_center_offset
    lines.append(f"optical_center: x={oc.x:g} y={oc.y:g} z={'adaptive' if oc.z is None else f'{oc.z:g}'}")
    if spec.params:
        lines.append("params: " + ", ".join(f"{k}={v:g}" for k, v in spec.params.items()))
    if spec.mount_chain:
        lines.append("mount_chain: " + ", ".join(spec.mount_chain))
    if spec.drill_features:
        lines.append("drill:")
        for f in spec.drill_features:
            lines.append(f"  - {f!r}")
    return "\n".join(lines)


def cmd_fmt(args) -> int:
    path = _doc_path(args.document)
    if not path.is_file():
        raise UsageError(f"cannot read {args.document}")
    text = path.read_text(encoding="utf-8")
    load_document(path)  # reject invalid documents before rewriting
    pretty = format_document(text)
    if args.check:
        if pretty != text:
            print(f"{args.document}: not formatted", file=sys.stderr)
            return 1
        return 0
    if args.write:
        path.write_text(pretty, encoding="utf-8")
    else:
        sys.stdout.write(pretty)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamplan", description="Compile optical baseplate layouts.")
    parser.add_argument("--version", action="version", version=f"beamplan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def doc_cmd(name, help_text, func):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("document", help=f"layout file (.optl); '{BUNDLED_PREFIX}NAME' picks a bundled example")
        p.add_argument("--catalog", action="append", metavar="PATH", help="catalog file (repeatable)")
        p.add_argument("--strict", action="store_true", help="treat warnings as errors")
        p.set_defaults(func=func)
        return p

    p = doc_cmd("compile", "compile and write the scene dump", cmd_compile)
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--force", action="store_true", help="write output even when diagnostics fail")
    doc_cmd("check", "compile and print diagnostics only", cmd_check)
    p = doc_cmd("export", "write per-plate artifacts", cmd_export)
    p.add_argument("--format", required=True, help="|".join(FORMATS))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="write output even when diagnostics fail")
    p = doc_cmd("bom", "bill of materials as CSV", cmd_bom)
    p.add_argument("--out", help="output file (default: standard output)")
    p = doc_cmd("report", "plan-view PNGs plus CSV tables", cmd_report)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("catalog", help="inspect the component catalog")
    p.add_argument("--catalog", action="append", metavar="PATH")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--list", action="store_true", help="list component ids (default)")
    g.add_argument("--show", metavar="ID", help="print one component")
    g.add_argument("--types", action="store_true", help="list optic types")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("fmt", help="print a layout in canonical form")
    p.add_argument("document")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--write", action="store_true", help="rewrite the file in place")
    g.add_argument("--check", action="store_true", help="exit 1 if the file is not canonical")
    p.set_defaults(func=cmd_fmt)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error parse {getattr(args, 'document', '-')} {exc}", file=sys.stderr)
    except CatalogError as exc:
        print(f"error catalog - {exc}", file=sys.stderr)
    except (UsageError, OSError) as exc:
        print(f"error usage - {exc}", file=sys.stderr)
    except (BeamplanError, ValueError) as exc:
        print(f"error input - {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
