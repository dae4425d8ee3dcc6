"""Artifacts written from a compiled scene.

Every writer is deterministic: element order follows the scene, numbers
are printed with fixed precision and nothing time-dependent is emitted.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

from . import beam as bm
from .baseplate import Solid, SolidFeature
from .diagnostics import Diagnostic
from .geometry import INCH, Point2, Pose
from .layout import ElementRecord, PartRecord, PlateRecord, Scene, SegmentRecord
from .mesh import mesh_solid, stl_bytes

SCENE_FORMAT = "beamplan-scene"
SCENE_VERSION = 1
BOM_HEADER = ("component_id", "description", "quantity", "plate")
DRILL_HEADER = (
    "plate", "feature", "element", "kind", "x", "y", "diameter", "depth",
    "counterbore_diameter", "counterbore_depth", "thread", "countersink",
)
BEAM_COLORS = ("#d62728", "#ff7f0e", "#bcbd22", "#2ca02c", "#17becf", "#1f77b4", "#9467bd", "#e377c2")


def slugify(name: str) -> str:
    s = re.sub(r"[^A-Za-z0-9._-]+", "_", name.strip()).strip("._")
    return s or "plate"


def plate_filenames(scene: Scene, ext: str) -> dict[str, str]:
    """Plate name -> unique file name; collisions after slugging get a numeric suffix."""
    out: dict[str, str] = {}
    used: set[str] = set()
    for p in scene.plates:
        base = slugify(p.name)
        cand, k = base, 2
        while cand.lower() in used:
            cand, k = f"{base}-{k}", k + 1
        used.add(cand.lower())
        out[p.name] = f"{cand}.{ext}"
    return out


def _f(v: float, digits: int = 4) -> str:
    s = f"{v:.{digits}f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _write(path: str | Path, data: bytes | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)
    return path


def _one_plate(scene: Scene, plate: str | None) -> str:
    if plate is not None:
        scene.plate(plate)
        return plate
    if len(scene.plates) != 1:
        raise ValueError(f"scene has {len(scene.plates)} plates; name one")
    return scene.plates[0].name


# -- STL ----------------------------------------------------------------------------


def export_stl(source: Scene | Solid, path: str | Path, *, plate: str | None = None) -> Path:
    """Binary STL of one plate solid (plate frame, millimetres)."""
    solid = source if isinstance(source, Solid) else source.solid(_one_plate(source, plate))
    header = f"beamplan {solid.name}".encode("utf-8")[:80]
    return _write(path, stl_bytes(mesh_solid(solid), header))


# -- SVG plan view ------------------------------------------------------------------


class _Canvas:
    """Table-frame millimetres to SVG user units (y flipped)."""

    def __init__(self, x0: float, y0: float, x1: float, y1: float):
        self.x0, self.y0, self.x1, self.y1 = x0, y0, x1, y1

    def pt(self, x: float, y: float) -> str:
        return f"{_f(x - self.x0)},{_f(self.y1 - y)}"

    def poly(self, pts) -> str:
        return " ".join(self.pt(x, y) for x, y in pts)

    @property
    def size(self) -> tuple[float, float]:
        return self.x1 - self.x0, self.y1 - self.y0


def _plate_corners(p: PlateRecord) -> list[tuple[float, float]]:
    pose = Pose(p.x * INCH, p.y * INCH, math.radians(p.angle))
    return [pose.apply(Point2(x, y)).as_tuple() for x, y in ((0, 0), (p.dx, 0), (p.dx, p.dy), (0, p.dy))]


def _collision_sets(scene: Scene) -> tuple[set[tuple[str, str]], set[str]]:
    parts: set[tuple[str, str]] = set()
    plates: set[str] = set()
    for d in scene.diagnostics:
        if d.code == "collide.plate":
            plates.update(d.subject.split("|"))
        elif d.code in ("collide.footprint", "collide.beam", "collide.edge") and "/" in d.subject:
            plate, rest = d.subject.split("/", 1)
            for name in rest.split("|"):
                parts.add((plate, name))
    return parts, plates


def _segment_points(s: SegmentRecord, canvas_len: float) -> tuple[tuple[float, float], tuple[float, float]] | None:
    a = s.ray_start
    if s.ray_end is not None:
        return a, s.ray_end
    b = s.terminus
    if b is None:
        length = canvas_len * 0.05
        b = (a[0] + length * math.cos(s.ray_heading), a[1] + length * math.sin(s.ray_heading))
    return a, b


def render_svg(scene: Scene, *, plate: str | None = None, margin: float = 10.0) -> str:
    plates = [scene.plate(plate)] if plate is not None else list(scene.plates)
    if plate is not None:
        xs, ys = zip(*_plate_corners(plates[0]))
        canvas = _Canvas(min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin)
    else:
        W, H = scene.table[0] * INCH, scene.table[1] * INCH
        canvas = _Canvas(-margin, -margin, W + margin, H + margin)
    names = {p.name for p in plates}
    w, h = canvas.size
    hit_parts, hit_plates = _collision_sets(scene)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(w)}mm" height="{_f(h)}mm" viewBox="0 0 {_f(w)} {_f(h)}">',
        "<style>text{font-family:sans-serif}</style>",
    ]
    if plate is None:
        W, H = scene.table[0] * INCH, scene.table[1] * INCH
        out.append('<g id="table">')
        out.append(f'<rect x="{_f(-canvas.x0)}" y="{_f(canvas.y1 - H)}" width="{_f(W)}" height="{_f(H)}" fill="none" stroke="#888" stroke-width="0.5"/>')
        out.append("</g>")
    out.append('<g id="plates">')
    for p in plates:
        out.append(
            f'<polygon id={quoteattr("plate:" + p.name)} points="{canvas.poly(_plate_corners(p))}" '
            'fill="#eef2f7" stroke="#445" stroke-width="0.6"/>'
        )
        cx, cy = _plate_corners(p)[3]
        out.append(f'<text x="{canvas.pt(cx, cy).split(",")[0]}" y="{_f(float(canvas.pt(cx, cy).split(",")[1]) - 2)}" font-size="5" fill="#445">{escape(p.name)}</text>')
    out.append("</g>")
    out.append('<g id="elements">')
    for e in scene.elements:
        if e.plate not in names:
            continue
        out.append(f'<g id={quoteattr("element:" + e.plate + "/" + e.name)}>')
        for part in e.parts:
            out.append(f'<polygon points="{canvas.poly(part.corners)}" fill="#cfd8e3" fill-opacity="0.8" stroke="#223" stroke-width="0.3"/>')
        x, y = e.table_pose[0], e.table_pose[1]
        out.append(f'<text x="{canvas.pt(x, y).split(",")[0]}" y="{canvas.pt(x, y).split(",")[1]}" font-size="2.5" fill="#111">{escape(e.name)}</text>')
        out.append("</g>")
    out.append("</g>")
    out.append('<g id="beams" fill="none" stroke-linecap="round">')
    diag = math.hypot(w, h)
    for s in scene.segments:
        if s.plate not in names:
            continue
        ends = _segment_points(s, diag)
        if ends is None:
            continue
        depth = bm.index_depth(s.index)
        color = BEAM_COLORS[depth % len(BEAM_COLORS)]
        width = max(0.25, 1.0 - 0.1 * depth)
        dash = ' stroke-dasharray="2,1"' if s.end in ("escaped", "open", "stray") else ""
        out.append(
            f'<polyline class="depth-{depth}" data-index="{bm.format_index(s.index)}" points="{canvas.poly(ends)}" '
            f'stroke="{color}" stroke-width="{_f(width)}"{dash}/>'
        )
    out.append("</g>")
    out.append('<g id="collisions" fill="#ff0000" fill-opacity="0.35" stroke="#ff0000" stroke-width="0.6">')
    for p in plates:
        if p.name in hit_plates:
            out.append(f'<polygon points="{canvas.poly(_plate_corners(p))}" fill="none"/>')
    for e in scene.elements:
        if e.plate in names and (e.plate, e.name) in hit_parts:
            for part in e.parts:
                out.append(f'<polygon points="{canvas.poly(part.corners)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_svg(scene: Scene, path: str | Path, *, plate: str | None = None, margin: float = 10.0) -> Path:
    """Plan view; the whole table, or one plate when ``plate`` is given."""
    return _write(path, render_svg(scene, plate=plate, margin=margin))


# -- BOM ----------------------------------------------------------------------------


def bom_rows(scene: Scene, *, plate: str | None = None) -> list[tuple[str, str, int, str]]:
    count: dict[str, int] = defaultdict(int)
    desc: dict[str, str] = {}
    where: dict[str, set[str]] = defaultdict(set)
    groups = {p.name: p.group or p.name for p in scene.plates}
    for e in scene.elements:
        if plate is not None and e.plate != plate:
            continue
        for part in e.parts:
            count[part.id] += 1
            desc.setdefault(part.id, part.description)
            where[part.id].add(groups.get(e.plate, e.plate))
    return [(cid, desc[cid], count[cid], ";".join(sorted(where[cid]))) for cid in sorted(count)]


def render_bom(scene: Scene, *, plate: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(BOM_HEADER)
    w.writerows(bom_rows(scene, plate=plate))
    return buf.getvalue()


def export_bom(scene: Scene, path: str | Path, *, plate: str | None = None) -> Path:
    return _write(path, render_bom(scene, plate=plate))


# -- drill drawings -----------------------------------------------------------------


def drill_rows(scene: Scene, *, plate: str | None = None) -> list[tuple]:
    rows = []
    for s in scene.solids:
        if plate is not None and s.name != plate:
            continue
        n = 0
        for f in s.features:
            if f.center is None:
                continue
            n += 1
            cb_d, cb_depth = f.counterbore if f.counterbore else (None, None)
            rows.append((
                s.name, f"H{n}", f.element, f.kind, _f(f.center.x, 3), _f(f.center.y, 3), _f(f.diameter, 3),
                "through" if f.depth is None else _f(f.depth, 3),
                "" if cb_d is None else _f(cb_d, 3), "" if cb_depth is None else _f(cb_depth, 3),
                f.thread or "", "yes" if f.countersink else "",
            ))
    return rows


def render_drill_csv(scene: Scene, *, plate: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(DRILL_HEADER)
    w.writerows(drill_rows(scene, plate=plate))
    return buf.getvalue()


def render_drill_svg(scene: Scene, *, plate: str | None = None, margin: float = 20.0) -> str:
    solids = [s for s in scene.solids if plate is None or s.name == plate]
    widths = [s.bounds[2] - s.bounds[0] for s in solids] or [0.0]
    heights = [s.bounds[3] - s.bounds[1] for s in solids]
    W = max(widths) + 2 * margin
    H = sum(h + 2 * margin for h in heights) or 2 * margin
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(W)}mm" height="{_f(H)}mm" viewBox="0 0 {_f(W)} {_f(H)}">',
        "<style>text{font-family:sans-serif}</style>",
    ]
    top = 0.0
    for s in solids:
        x0, y0, x1, y1 = s.bounds
        cv = _Canvas(x0 - margin, y0 - margin, x1 + margin, y1 + margin)
        out.append(f'<g id={quoteattr("drill:" + s.name)} transform="translate(0,{_f(top)})">')
        out.append(f'<polygon points="{cv.poly([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])}" fill="none" stroke="#000" stroke-width="0.4"/>')
        out.append(f'<text x="{_f(margin)}" y="{_f(margin / 2)}" font-size="4">{escape(s.name)} ({_f(x1 - x0, 2)} x {_f(y1 - y0, 2)} x {_f(s.thickness, 2)} mm)</text>')
        # outline dimensions
        yb = float(cv.pt(x0, y0).split(",")[1]) + margin / 2
        out.append(f'<line x1="{_f(margin)}" y1="{_f(yb)}" x2="{_f(margin + x1 - x0)}" y2="{_f(yb)}" stroke="#000" stroke-width="0.2"/>')
        out.append(f'<text x="{_f(margin + (x1 - x0) / 2)}" y="{_f(yb - 1)}" font-size="3" text-anchor="middle">{_f(x1 - x0, 2)}</text>')
        xl = margin / 2
        out.append(f'<line x1="{_f(xl)}" y1="{_f(margin)}" x2="{_f(xl)}" y2="{_f(margin + y1 - y0)}" stroke="#000" stroke-width="0.2"/>')
        out.append(f'<text x="{_f(xl - 1)}" y="{_f(margin + (y1 - y0) / 2)}" font-size="3" text-anchor="end">{_f(y1 - y0, 2)}</text>')
        n = 0
        for f in s.features:
            if f.center is None:
                if f.ring:
                    out.append(f'<polygon points="{cv.poly(f.ring)}" fill="#ddd" stroke="#666" stroke-width="0.2"/>')
                continue
            n += 1
            px, py = cv.pt(f.center.x, f.center.y).split(",")
            if f.counterbore:
                out.append(f'<circle cx="{px}" cy="{py}" r="{_f(f.counterbore[0] / 2)}" fill="none" stroke="#666" stroke-width="0.2"/>')
            out.append(f'<circle cx="{px}" cy="{py}" r="{_f(f.diameter / 2)}" fill="none" stroke="#000" stroke-width="0.3"/>')
            label = f"H{n}" + (f" {f.thread}" if f.thread else "")
            out.append(f'<text x="{_f(float(px) + f.diameter / 2 + 0.5)}" y="{py}" font-size="2">{escape(label)}</text>')
        out.append("</g>")
        top += (y1 - y0) + 2 * margin
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_drill_drawing(scene: Scene, path: str | Path, *, plate: str | None = None) -> tuple[Path, Path]:
    """SVG drawing at ``path`` plus the hole table next to it (``.csv``)."""
    path = Path(path)
    svg = _write(path, render_drill_svg(scene, plate=plate))
    table = _write(path.with_suffix(".csv"), render_drill_csv(scene, plate=plate))
    return svg, table


# -- scene dump ---------------------------------------------------------------------


def _pt(p):
    return None if p is None else [p[0], p[1]]


def scene_to_dict(scene: Scene) -> dict:
    return {
        "format": SCENE_FORMAT,
        "version": SCENE_VERSION,
        "table": list(scene.table),
        "provenance": dict(scene.provenance),
        "plates": [
            {k: getattr(p, k) for k in PlateRecord.__dataclass_fields__} for p in scene.plates
        ],
        "elements": [
            {
                "plate": e.plate, "name": e.name, "component": e.component, "role": e.role, "beam": e.beam,
                "index": bm.format_index(e.index), "constraint": list(e.constraint),
                "plate_pose": list(e.plate_pose), "table_pose": list(e.table_pose),
                "parts": [{"id": p.id, "description": p.description, "corners": [list(c) for c in p.corners]} for p in e.parts],
            }
            for e in scene.elements
        ],
        "beams": _beams(scene.segments),
        "solids": [
            {
                "name": s.name, "bounds": list(s.bounds), "thickness": s.thickness,
                "features": [_feature(f) for f in s.features],
            }
            for s in scene.solids
        ],
        "diagnostics": [
            {"severity": d.severity, "code": d.code, "subject": d.subject, "message": d.message} for d in scene.diagnostics
        ],
    }


def _beams(segments) -> dict:
    """plate -> source -> "0b.." -> runs; ``seq`` keeps the global trace order."""
    out: dict = {}
    for seq, s in enumerate(segments):
        runs = out.setdefault(s.plate, {}).setdefault(s.beam, {}).setdefault(bm.format_index(s.index), [])
        runs.append({
            "seq": seq, "origin": _pt(s.origin), "heading": s.heading, "terminus": _pt(s.terminus),
            "ray_start": _pt(s.ray_start), "ray_end": _pt(s.ray_end), "ray_heading": s.ray_heading,
            "ray_state": list(s.ray_state), "frequency_offset": s.frequency_offset, "end": s.end,
            "start_element": s.start_element, "end_element": s.end_element,
        })
    return out


def _feature(f: SolidFeature) -> dict:
    return {
        "kind": f.kind, "element": f.element, "depth": f.depth, "center": _pt(f.center.as_tuple()) if f.center else None,
        "diameter": f.diameter, "counterbore": list(f.counterbore) if f.counterbore else None, "thread": f.thread,
        "countersink": f.countersink, "ring": [list(p) for p in f.ring],
    }


def _tp(v):
    return None if v is None else tuple(v)


def scene_from_dict(data: dict) -> Scene:
    if data.get("format") != SCENE_FORMAT:
        raise ValueError("not a beamplan scene dump")
    if data.get("version") != SCENE_VERSION:
        raise ValueError(f"unsupported scene version {data.get('version')!r}")
    plates = tuple(PlateRecord(**p) for p in data["plates"])
    elements = tuple(
        ElementRecord(
            e["plate"], e["name"], e["component"], e["role"], e["beam"], bm.parse_index(e["index"]),
            (e["constraint"][0], e["constraint"][1]), tuple(e["plate_pose"]), tuple(e["table_pose"]),
            tuple(PartRecord(p["id"], p["description"], tuple(tuple(c) for c in p["corners"])) for p in e["parts"]),
        )
        for e in data["elements"]
    )
    runs = []
    for plate, sources in data["beams"].items():
        for source, indices in sources.items():
            for index, items in indices.items():
                for r in items:
                    runs.append((r["seq"], SegmentRecord(
                        plate, source, bm.parse_index(index), _tp(r["origin"]), r["heading"], _tp(r["terminus"]),
                        _tp(r["ray_start"]), _tp(r["ray_end"]), r["ray_heading"], tuple(r["ray_state"]),
                        r["frequency_offset"], r["end"], r["start_element"], r["end_element"],
                    )))
    segments = tuple(s for _, s in sorted(runs, key=lambda t: t[0]))
    solids = tuple(
        Solid(
            s["name"], tuple(s["bounds"]), s["thickness"],
            tuple(
                SolidFeature(
                    f["kind"], f["element"], f["depth"], Point2(*f["center"]) if f["center"] else None,
                    f["diameter"], _tp(f["counterbore"]), f["thread"], f["countersink"],
                    tuple(tuple(p) for p in f["ring"]),
                )
                for f in s["features"]
            ),
        )
        for s in data["solids"]
    )
    diags = tuple(Diagnostic(d["severity"], d["code"], d["message"], d["subject"]) for d in data["diagnostics"])
    return Scene(tuple(data["table"]), plates, elements, segments, solids, diags, dict(data["provenance"]))


def dumps_scene(scene: Scene) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats, trailing newline."""
    return json.dumps(scene_to_dict(scene), sort_keys=True, indent=1, allow_nan=False, ensure_ascii=False) + "\n"


def loads_scene(text: str) -> Scene:
    return scene_from_dict(json.loads(text))


def dump_scene(scene: Scene, path: str | Path) -> Path:
    return _write(path, dumps_scene(scene))


def load_scene(path: str | Path) -> Scene:
    return loads_scene(Path(path).read_text(encoding="utf-8"))
