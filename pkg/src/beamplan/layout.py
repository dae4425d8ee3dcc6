"""Layout documents (``.optl``): parsing, formatting and compilation.

A document is line oriented; indentation is not significant and ``#``
starts a comment::

    table 36 22
    use "parts.toml"
    wavelength 780

    template cell
      param spacing=1in
      plate dx=2in dy=2in
      beam in x=1in y=0 angle=90
      element "fold" role=mirror beam=in beam_index=0b1 distance=spacing angle=up-right
    end

    plate cell at (2, 3, 0) with half_inch_mounted name=first
    grid cell rows=2 cols=3 pitch=3 at (10, 2, 0) with half_inch_mounted name=array

Table coordinates are inches; everything inside a template is millimetres.
Inside a template, numbers written with a unit (``1.5in``, ``20mm``) and
the plate size names ``dx``/``dy`` scale with the optic type, while bare
numbers are absolute millimetres (so ``distance=f`` can follow a lens focal
length).  Angles are degrees, a cardinal name or a turn such as
``up-right``.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from . import beam as bm
from . import diagnostics as dg
from .baseplate import Baseplate, Solid, build_solid, check_design_rules, convex_overlap, detect_collisions
from .components import GAP, Catalog, bundled_catalog, littrow_angle, load_catalog
from .errors import CatalogError, ParseError, PlacementError, TurnError
from .expr import ExpressionError, evaluate
from .geometry import CARDINALS, INCH, Point2, heading_from_cardinal, normalize_angle, unit

TEMPLATE_DIR = Path(__file__).parent / "data" / "templates"

_UNIT = re.compile(r"(?<![\w.])((?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)(in|mm)\b")
_TURN = re.compile(r"^(right|up|left|down)-(right|up|left|down)$")


# -- document model ---------------------------------------------------------------


@dataclass(frozen=True)
class Arg:
    key: str | None
    value: str
    column: int


@dataclass(frozen=True)
class Statement:
    keyword: str
    args: tuple[Arg, ...]
    line: int
    comment: str | None = None


@dataclass(frozen=True)
class ElementDecl:
    name: str
    keys: Mapping[str, str]
    line: int


@dataclass(frozen=True)
class BeamDecl:
    name: str
    keys: Mapping[str, str]
    line: int


@dataclass(frozen=True)
class Template:
    id: str
    params: Mapping[str, str]
    plate: Mapping[str, str]
    beams: tuple[BeamDecl, ...]
    elements: tuple[ElementDecl, ...]
    line: int
    origin: str = ""


@dataclass(frozen=True)
class Instance:
    template: str
    x: float
    y: float
    angle: float  # degrees, multiple of 90
    optic_type: str
    name: str
    label: str = ""
    params: Mapping[str, str] = field(default_factory=dict)
    group: str = ""
    line: int = 0


@dataclass
class LayoutDocument:
    table: tuple[float, float] | None = None
    uses: list[tuple[str, int]] = field(default_factory=list)
    wavelength: float | None = None
    templates: dict[str, Template] = field(default_factory=dict)
    instances: list[Instance] = field(default_factory=list)
    statements: list[Statement] = field(default_factory=list)
    source: str = ""
    path: Path | None = None


# -- tokenizer ----------------------------------------------------------------------


def _split(line: str, lineno: int) -> tuple[list[tuple[str, int]], str | None]:
    """Whitespace-separated words; quotes and parentheses group."""
    words: list[tuple[str, int]] = []
    i, n = 0, len(line)
    comment = None
    while i < n:
        c = line[i]
        if c.isspace():
            i += 1
            continue
        if c == "#":
            comment = line[i + 1 :].strip()
            break
        start = i
        depth = 0
        while i < n:
            c = line[i]
            if c == '"':
                j = line.find('"', i + 1)
                if j < 0:
                    raise ParseError("unterminated string", lineno, i + 1)
                i = j + 1
                continue
            if c == "(":
                depth += 1
            elif c == ")":
                depth -= 1
                if depth < 0:
                    raise ParseError("unbalanced ')'", lineno, i + 1)
            elif (c.isspace() or c == "#") and depth == 0:
                break
            i += 1
        if depth:
            raise ParseError("unbalanced '('", lineno, start + 1)
        words.append((line[start:i], start + 1))
    return words, comment


def _args(words: list[tuple[str, int]]) -> tuple[Arg, ...]:
    out = []
    for w, col in words:
        m = re.match(r"^([A-Za-z_][\w.]*)=(.*)$", w, re.S)
        if m and not w.startswith('"'):
            out.append(Arg(m.group(1), m.group(2), col))
        else:
            out.append(Arg(None, w, col))
    return tuple(out)


def _unquote(a: Arg, line: int) -> str:
    v = a.value
    if len(v) >= 2 and v[0] == v[-1] == '"':
        return v[1:-1]
    if re.fullmatch(r"[\w.\-:/]+", v):
        return v
    raise ParseError(f"expected a name or quoted string, got {v!r}", line, a.column)


def tokenize(text: str) -> list[Statement]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        words, comment = _split(raw, lineno)
        if not words:
            if comment is not None:
                out.append(Statement("#", (), lineno, comment))
            continue
        kw, col = words[0]
        if not re.fullmatch(r"[a-z_]+", kw):
            raise ParseError(f"expected a keyword, got {kw!r}", lineno, col)
        out.append(Statement(kw, _args(words[1:]), lineno, comment))
    return out


# -- parser -------------------------------------------------------------------------

_PLATE_KEYS = {"dx", "dy", "dz", "gap", "optics_dz", "wavelength"}
_BEAM_KEYS = {"x", "y", "angle", "drill_width"}
_ELEMENT_KEYS = {"role", "component", "beam", "beam_index", "distance", "x", "y", "angle", "dz", "mount"}
_INSTANCE_KEYS = {"name", "label"}
_GRID_KEYS = {"rows", "cols", "pitch", "name", "label"}


def _keyed(stmt: Statement, allowed: set[str], *, prefixes: tuple[str, ...] = (), extra: set[str] = frozenset()) -> dict[str, str]:
    out: dict[str, str] = {}
    for a in stmt.args:
        if a.key is None:
            raise ParseError(f"unexpected value {a.value!r} in '{stmt.keyword}'", stmt.line, a.column)
        ok = a.key in allowed or a.key in extra or any(a.key.startswith(p) and len(a.key) > len(p) for p in prefixes)
        if not ok:
            raise ParseError(f"unknown key {a.key!r} in '{stmt.keyword}'", stmt.line, a.column)
        if a.key in out:
            raise ParseError(f"duplicate key {a.key!r}", stmt.line, a.column)
        if a.value == "":
            raise ParseError(f"empty value for {a.key!r}", stmt.line, a.column)
        out[a.key] = a.value
    return out


def _number(text: str, line: int, col: int, what: str) -> float:
    try:
        return evaluate(text)
    except ExpressionError as exc:
        raise ParseError(f"{what}: {exc}", line, col) from None


def _at(stmt: Statement, pos: int) -> tuple[float, float, float]:
    args = stmt.args
    if pos + 1 >= len(args) or args[pos].key is not None or args[pos].value != "at":
        col = args[pos].column if pos < len(args) else 1
        raise ParseError("expected 'at (x, y, angle)'", stmt.line, col)
    a = args[pos + 1]
    v = a.value.strip()
    if not (v.startswith("(") and v.endswith(")")):
        raise ParseError("expected '(x, y, angle)'", stmt.line, a.column)
    parts = [p.strip() for p in v[1:-1].split(",")]
    if len(parts) not in (2, 3):
        raise ParseError("pose needs 2 or 3 components", stmt.line, a.column)
    nums = [_number(p, stmt.line, a.column, "pose") for p in parts] + [0.0] * (3 - len(parts))
    if not math.isclose(nums[2] / 90.0, round(nums[2] / 90.0), abs_tol=1e-12):
        raise ParseError(f"plate angle {nums[2]:g} is not a multiple of 90 degrees", stmt.line, a.column)
    return nums[0], nums[1], nums[2]


def _with(stmt: Statement, pos: int) -> str:
    args = stmt.args
    if pos + 1 >= len(args) or args[pos].key is not None or args[pos].value != "with":
        col = args[pos].column if pos < len(args) else 1
        raise ParseError("expected 'with <optic-type>'", stmt.line, col)
    return _unquote(args[pos + 1], stmt.line)


def generate_grid(
    template: str,
    rows: int,
    cols: int,
    pitch: float,
    start: tuple[float, float, float],
    optic_type: str,
    *,
    name: str | None = None,
    label: str = "",
    params: Mapping[str, str] | None = None,
    line: int = 0,
) -> list[Instance]:
    """rows x cols instances at ``start + (i*pitch, j*pitch)`` (inches)."""
    if rows < 1 or cols < 1:
        raise ValueError("grid needs rows >= 1 and cols >= 1")
    if not pitch > 0:
        raise ValueError("grid pitch must be positive")
    base = name or template
    x0, y0, a = start
    return [
        Instance(
            template, x0 + i * pitch, y0 + j * pitch, a, optic_type, f"{base}_r{i}_c{j}",
            label, dict(params or {}), base, line,
        )
        for i in range(rows)
        for j in range(cols)
    ]


def parse_document(text: str, *, path: str | Path | None = None, include: bool = True) -> LayoutDocument:
    """Parse a layout document; ``use "*.optl"`` imports templates."""
    doc = LayoutDocument(source=text, path=Path(path) if path else None)
    stmts = tokenize(text)
    doc.statements = stmts
    current: dict | None = None
    names: set[str] = set()
    for st in stmts:
        kw = st.keyword
        if kw == "#":
            continue
        if current is not None:
            if kw == "end":
                if st.args:
                    raise ParseError("'end' takes no arguments", st.line, st.args[0].column)
                t = Template(
                    current["id"], current["params"], current["plate"] or {},
                    tuple(current["beams"]), tuple(current["elements"]), current["line"], str(path or ""),
                )
                if t.id in doc.templates:
                    raise ParseError(f"duplicate template {t.id!r}", current["line"])
                if not current["plate"]:
                    raise ParseError(f"template {t.id!r} has no 'plate' statement", current["line"])
                doc.templates[t.id] = t
                current = None
            elif kw == "param":
                for k, v in _keyed(st, set(), prefixes=("",)).items():
                    if k in current["params"]:
                        raise ParseError(f"duplicate param {k!r}", st.line)
                    current["params"][k] = v
            elif kw == "plate":
                if current["plate"] is not None:
                    raise ParseError("template has two 'plate' statements", st.line)
                keys = _keyed(st, _PLATE_KEYS)
                for req in ("dx", "dy"):
                    if req not in keys:
                        raise ParseError(f"plate needs {req}=", st.line)
                current["plate"] = keys
            elif kw == "beam":
                if not st.args or st.args[0].key is not None:
                    raise ParseError("beam needs a name", st.line)
                bname = _unquote(st.args[0], st.line)
                keys = _keyed(Statement(kw, st.args[1:], st.line), _BEAM_KEYS)
                for req in ("x", "y", "angle"):
                    if req not in keys:
                        raise ParseError(f"beam needs {req}=", st.line)
                if any(b.name == bname for b in current["beams"]):
                    raise ParseError(f"duplicate beam {bname!r}", st.line)
                current["beams"].append(BeamDecl(bname, keys, st.line))
            elif kw == "element":
                if not st.args or st.args[0].key is not None:
                    raise ParseError("element needs a quoted name", st.line)
                ename = _unquote(st.args[0], st.line)
                keys = _keyed(Statement(kw, st.args[1:], st.line), _ELEMENT_KEYS, prefixes=("set.", "mount."))
                if ("role" in keys) == ("component" in keys):
                    raise ParseError("element needs exactly one of role= or component=", st.line)
                if sum(k in keys for k in ("distance", "x", "y")) > 1:
                    raise ParseError("element takes at most one of distance=, x=, y=", st.line)
                if any(e.name == ename for e in current["elements"]):
                    raise ParseError(f"duplicate element name {ename!r}", st.line)
                current["elements"].append(ElementDecl(ename, keys, st.line))
            else:
                raise ParseError(f"unexpected '{kw}' inside template", st.line, 1)
            continue

        if kw == "table":
            if doc.table is not None:
                raise ParseError("duplicate 'table' statement", st.line)
            vals = [a for a in st.args if a.key is None]
            keyed = {a.key: a for a in st.args if a.key is not None}
            if set(keyed) - {"dx", "dy"}:
                bad = sorted(set(keyed) - {"dx", "dy"})[0]
                raise ParseError(f"unknown key {bad!r} in 'table'", st.line, keyed[bad].column)
            items = [(a.value, a.column) for a in vals] + [(keyed[k].value, keyed[k].column) for k in ("dx", "dy") if k in keyed]
            if len(items) != 2:
                raise ParseError("table needs two sizes (inches)", st.line)
            dx, dy = (_number(v, st.line, c, "table size") for v, c in items)
            if dx <= 0 or dy <= 0:
                raise ParseError("table sizes must be positive", st.line)
            doc.table = (dx, dy)
        elif kw == "use":
            if len(st.args) != 1 or st.args[0].key is not None:
                raise ParseError('use needs one quoted path', st.line)
            doc.uses.append((_unquote(st.args[0], st.line), st.line))
        elif kw == "wavelength":
            if len(st.args) != 1:
                raise ParseError("wavelength needs one value (nm)", st.line)
            doc.wavelength = _number(st.args[0].value, st.line, st.args[0].column, "wavelength")
        elif kw == "template":
            if len(st.args) != 1 or st.args[0].key is not None:
                raise ParseError("template needs one name", st.line)
            current = {
                "id": _unquote(st.args[0], st.line), "params": {}, "plate": None,
                "beams": [], "elements": [], "line": st.line,
            }
        elif kw == "plate":
            if not st.args or st.args[0].key is not None:
                raise ParseError("plate needs a template name", st.line)
            tid = _unquote(st.args[0], st.line)
            x, y, a = _at(st, 1)
            ot = _with(st, 3)
            keys = _keyed(Statement(kw, st.args[5:], st.line), _INSTANCE_KEYS, prefixes=("",))
            params = {k: v for k, v in keys.items() if k not in _INSTANCE_KEYS}
            name = _unquote(Arg("name", keys["name"], 0), st.line) if "name" in keys else tid
            label = _unquote(Arg("label", keys["label"], 0), st.line) if "label" in keys else ""
            inst = Instance(tid, x, y, a, ot, name, label, params, name, st.line)
            _add_instances(doc, [inst], names, st.line)
        elif kw == "grid":
            if not st.args or st.args[0].key is not None:
                raise ParseError("grid needs a template name", st.line)
            tid = _unquote(st.args[0], st.line)
            pos = next((i for i, a in enumerate(st.args) if a.key is None and a.value == "at"), None)
            if pos is None:
                raise ParseError("expected 'at (x, y, angle)'", st.line)
            head = _keyed(Statement(kw, st.args[1:pos], st.line), _GRID_KEYS)
            start = _at(st, pos)
            ot = _with(st, pos + 2)
            tail = _keyed(Statement(kw, st.args[pos + 4 :], st.line), _GRID_KEYS, prefixes=("",))
            keys = {**head, **tail}
            for req in ("rows", "cols", "pitch"):
                if req not in keys:
                    raise ParseError(f"grid needs {req}=", st.line)
            rows = _number(keys["rows"], st.line, 1, "rows")
            cols = _number(keys["cols"], st.line, 1, "cols")
            pitch = _number(keys["pitch"], st.line, 1, "pitch")
            if rows != int(rows) or cols != int(cols) or rows < 1 or cols < 1 or pitch <= 0:
                raise ParseError("grid needs integer rows, cols >= 1 and pitch > 0", st.line)
            params = {k: v for k, v in keys.items() if k not in _GRID_KEYS}
            name = _unquote(Arg("name", keys["name"], 0), st.line) if "name" in keys else tid
            label = _unquote(Arg("label", keys["label"], 0), st.line) if "label" in keys else ""
            insts = generate_grid(tid, int(rows), int(cols), pitch, start, ot, name=name, label=label, params=params, line=st.line)
            _add_instances(doc, insts, names, st.line)
        elif kw in ("end", "param", "beam", "element"):
            raise ParseError(f"'{kw}' outside a template", st.line, 1)
        else:
            raise ParseError(f"unknown statement '{kw}'", st.line, 1)
    if current is not None:
        raise ParseError(f"template {current['id']!r} is missing 'end'", current["line"])
    if include:
        for use, line in doc.uses:
            if use.endswith(".optl"):
                _include(doc, use, line)
    if doc.table is None and (doc.instances or not doc.templates):
        raise ParseError("document has no 'table' statement", 1 if not stmts else stmts[0].line)
    return doc


def _add_instances(doc: LayoutDocument, insts: list[Instance], names: set[str], line: int) -> None:
    for inst in insts:
        if inst.name in names:
            raise ParseError(f"duplicate plate name {inst.name!r}", line)
        names.add(inst.name)
        doc.instances.append(inst)


def resolve_use(use: str, base: Path | None) -> Path:
    """Local path relative to the document, else a bundled file of that name."""
    p = Path(use)
    candidates = [p] if p.is_absolute() else ([base.parent / p] if base else [p])
    candidates.append(TEMPLATE_DIR / p.name)
    for c in candidates:
        if c.is_file():
            return c
    raise ParseError(f"cannot find {use!r}")


def _include(doc: LayoutDocument, use: str, line: int) -> None:
    try:
        path = resolve_use(use, doc.path)
    except ParseError:
        raise ParseError(f"cannot find {use!r}", line) from None
    try:
        sub = parse_document(path.read_text(encoding="utf-8"), path=path)
    except ParseError as exc:
        raise ParseError(f"in {path.name}: {exc}", line) from None
    for tid, t in sub.templates.items():
        if tid in doc.templates:
            raise ParseError(f"template {tid!r} defined twice (via {use!r})", line)
        doc.templates[tid] = t


def load_document(path: str | Path) -> LayoutDocument:
    path = Path(path)
    return parse_document(path.read_text(encoding="utf-8"), path=path)


# -- formatter ----------------------------------------------------------------------

_KEY_ORDER = {
    "plate": ["dx", "dy", "dz", "gap", "optics_dz", "wavelength"],
    "beam": ["x", "y", "angle", "drill_width"],
    "element": ["role", "component", "mount", "beam", "beam_index", "distance", "x", "y", "angle", "dz"],
}


def format_document(text: str) -> str:
    """Canonical layout: one statement per line, template bodies indented two spaces."""
    stmts = tokenize(text)
    out: list[str] = []
    inside = False
    prev_kw = None
    for st in stmts:
        kw = st.keyword
        if kw in ("template", "plate", "grid") and not inside and prev_kw not in (None, "#") and out and out[-1] != "":
            if not (kw in ("plate", "grid") and prev_kw in ("plate", "grid")):
                out.append("")
        indent = "  " if inside and kw != "end" else ""
        if kw == "#":
            out.append(f"{indent}# {st.comment}".rstrip())
            prev_kw = kw
            continue
        args = list(st.args)
        if inside and kw in _KEY_ORDER:
            lead = [a for a in args if a.key is None]
            order = _KEY_ORDER[kw]
            keyed = sorted(
                (a for a in args if a.key is not None),
                key=lambda a: (order.index(a.key) if a.key in order else len(order), a.key),
            )
            args = lead + keyed
        words = [kw] + [_fmt_arg(a) for a in args]
        line = indent + " ".join(words)
        if st.comment is not None:
            line += f"  # {st.comment}"
        out.append(line)
        if kw == "template":
            inside = True
        elif kw == "end":
            inside = False
            out.append("")
        prev_kw = kw
    while out and out[-1] == "":
        out.pop()
    return "\n".join(out) + "\n"


def _fmt_arg(a: Arg) -> str:
    v = a.value
    if v.startswith("(") and v.endswith(")"):
        v = "(" + ", ".join(p.strip() for p in v[1:-1].split(",")) + ")"
    return v if a.key is None else f"{a.key}={v}"


# -- scene --------------------------------------------------------------------------


@dataclass(frozen=True)
class PlateRecord:
    name: str
    template: str
    optic_type: str
    group: str
    label: str
    x: float
    y: float
    angle: float
    dx: float
    dy: float
    dz: float
    gap: float
    optics_dz: float
    scale: float


@dataclass(frozen=True)
class PartRecord:
    id: str
    description: str
    corners: tuple[tuple[float, float], ...]  # table frame


@dataclass(frozen=True)
class ElementRecord:
    plate: str
    name: str
    component: str
    role: str
    beam: str
    index: int
    constraint: tuple[str, float]
    plate_pose: tuple[float, float, float]
    table_pose: tuple[float, float, float]
    parts: tuple[PartRecord, ...]


@dataclass(frozen=True)
class SegmentRecord:
    plate: str
    beam: str
    index: int
    origin: tuple[float, float]
    heading: float
    terminus: tuple[float, float] | None
    ray_start: tuple[float, float]
    ray_end: tuple[float, float] | None
    ray_heading: float
    ray_state: tuple[float, float]
    frequency_offset: float
    end: str
    start_element: str | None
    end_element: str | None


@dataclass(frozen=True)
class Scene:
    table: tuple[float, float]
    plates: tuple[PlateRecord, ...]
    elements: tuple[ElementRecord, ...]
    segments: tuple[SegmentRecord, ...]
    solids: tuple[Solid, ...]
    diagnostics: tuple[dg.Diagnostic, ...]
    provenance: Mapping[str, str]

    @property
    def ok(self) -> bool:
        return not dg.has_errors(self.diagnostics)

    def plate(self, name: str) -> PlateRecord:
        for p in self.plates:
            if p.name == name:
                return p
        raise KeyError(name)

    def elements_on(self, plate: str) -> list[ElementRecord]:
        return [e for e in self.elements if e.plate == plate]

    def segments_on(self, plate: str) -> list[SegmentRecord]:
        return [s for s in self.segments if s.plate == plate]

    def solid(self, plate: str) -> Solid:
        for s in self.solids:
            if s.name == plate:
                return s
        raise KeyError(plate)

    def element(self, name: str, plate: str | None = None) -> ElementRecord:
        for e in self.elements:
            if e.name == name and (plate is None or e.plate == plate):
                return e
        raise KeyError(name)


# -- compiler -----------------------------------------------------------------------


@dataclass
class CompiledPlate:
    """A traced plate before it is frozen into the scene."""

    instance: Instance
    plate: Baseplate
    scale: float
    diagnostics: list[dg.Diagnostic]
    solid: Solid | None = None


def _scaled_env(text: str) -> str:
    return _UNIT.sub(lambda m: f"({m.group(1)}*_{m.group(2)})", text)


def _fold_deg(in_deg: float, out_deg: float) -> float:
    """Normal (degrees) of a mirror folding heading ``in_deg`` into ``out_deg``."""
    a = math.radians(in_deg) + math.pi
    b = math.radians(out_deg)
    d = math.atan2(math.sin(b - a), math.cos(b - a))
    return math.degrees(normalize_angle(a + d / 2.0))


FUNCTIONS = {
    "littrow": lambda wl, density, order=1: math.degrees(littrow_angle(wl, density, int(order))),
    "fold": _fold_deg,
}


class _Env:
    def __init__(self, scale: float, names: dict[str, float]):
        self.scale = scale
        self.names = {"_in": INCH * scale, "_mm": scale, "inch": INCH, "gap": GAP, "scale": scale}
        self.names.update(names)

    def num(self, text: str) -> float:
        return evaluate(_scaled_env(text), self.names, FUNCTIONS)

    def angle(self, text: str):
        t = text.strip()
        if t in CARDINALS or _TURN.match(t):
            return t
        return math.radians(self.num(t))

    def heading(self, text: str) -> float:
        a = self.angle(text)
        if isinstance(a, str):
            if a not in CARDINALS:
                raise PlacementError(f"a beam heading cannot be a turn ({a!r})")
            return heading_from_cardinal(a)
        return a


def _err(code: str, msg: str, subject: str) -> dg.Diagnostic:
    return dg.error(code, msg, subject)


def compile_instance(
    inst: Instance, template: Template, catalog: Catalog, wavelength: float | None = None
) -> CompiledPlate:
    ot = catalog.optic_type(inst.optic_type)
    s = ot.scale
    diags: list[dg.Diagnostic] = []
    env = _Env(s, {"base_dz": ot.base_dz, "optics_dz": ot.optics_dz, "beam_width": ot.beam_width})
    unknown = set(inst.params) - set(template.params)
    if unknown:
        raise PlacementError(f"template {template.id!r} has no parameter(s) {sorted(unknown)}")
    for k, v in template.params.items():
        env.names[k] = env.num(inst.params.get(k, v))
    pk = template.plate
    dx, dy = env.num(pk["dx"]), env.num(pk["dy"])
    env.names.update(dx=dx, dy=dy)
    plate = Baseplate(
        dx, dy, env.num(pk.get("dz", "base_dz")),
        x=inst.x, y=inst.y, angle=math.radians(inst.angle),
        gap=env.num(pk.get("gap", "gap")),
        optics_dz=env.num(pk.get("optics_dz", "optics_dz")),
        name=inst.name, label=inst.label,
        wavelength=env.num(pk["wavelength"]) if "wavelength" in pk else wavelength,
    )
    handles = {}
    for b in template.beams:
        handles[b.name] = plate.add_beam_path(
            env.num(b.keys["x"]), env.num(b.keys["y"]), env.heading(b.keys["angle"]),
            env.num(b.keys.get("drill_width", "beam_width")), name=b.name,
        )
    for e in template.elements:
        k = e.keys
        try:
            overrides = {key[4:]: env.num(v) for key, v in k.items() if key.startswith("set.")}
            margs = {key[6:]: env.num(v) for key, v in k.items() if key.startswith("mount.")}
            placement: dict[str, float] = {}
            if "role" in k:
                role = k["role"]
                if role not in ot.roles:
                    raise CatalogError(f"optic type {ot.id!r} has no role {role!r}")
                binding = ot.roles[role]
                spec = catalog.spec(
                    binding.component, {**binding.overrides, **overrides},
                    k.get("mount", binding.mount), {**binding.mount_args, **margs},
                )
                placement = dict(binding.placement)
            else:
                role = ""
                spec = catalog.spec(k["component"], overrides, k.get("mount"), margs)
            for key in ("distance", "x", "y"):
                if key in k:
                    placement = {key: env.num(k[key])}
            if not placement:
                raise PlacementError(f"element {e.name!r} has no placement (distance=, x= or y=)")
            bname = k.get("beam", template.beams[0].name if template.beams else "")
            if bname not in handles:
                raise PlacementError(f"element {e.name!r} names unknown beam {bname!r}")
            index = int(env.num(k.get("beam_index", "1")))
            plate.place_element_along_beam(
                e.name, spec, handles[bname], index,
                angle=env.angle(k.get("angle", "0")), dz=env.num(k.get("dz", "0")), role=role or None,
                **placement,
            )
        except CatalogError as exc:
            diags.append(_err("layout.reference", str(exc), e.name))
        except (PlacementError, TurnError, ExpressionError, ValueError) as exc:
            diags.append(_err("layout.element", str(exc), e.name))
    result = plate.trace()
    diags += result.diagnostics
    diags += check_design_rules(plate)
    diags += detect_collisions(plate)
    cp = CompiledPlate(inst, plate, s, diags)
    try:
        cp.solid = build_solid(plate)
    except PlacementError as exc:
        diags.append(_err("solid.drill", str(exc), inst.name))
    return cp


def _catalog_for(doc: LayoutDocument, catalog: Catalog | None) -> Catalog:
    catalog = catalog or bundled_catalog()
    extra = []
    for use, line in doc.uses:
        if use.endswith(".toml"):
            try:
                extra.append(resolve_use(use, doc.path))
            except ParseError:
                raise CatalogError(f"line {line}: cannot find catalog {use!r}") from None
    if extra:
        catalog = catalog.merged(load_catalog(extra))
    return catalog


def compile_document(doc: LayoutDocument, catalog: Catalog | None = None, *, max_depth: int = bm.DEFAULT_MAX_DEPTH) -> Scene:
    """Instantiate, trace and check every plate; aggregate diagnostics."""
    catalog = _catalog_for(doc, catalog)
    table = doc.table or (0.0, 0.0)
    compiled: list[CompiledPlate] = []
    diags: list[dg.Diagnostic] = []
    for inst in doc.instances:
        template = doc.templates.get(inst.template)
        if template is None:
            diags.append(_err("layout.reference", f"unknown template {inst.template!r}", inst.name))
            continue
        try:
            catalog.optic_type(inst.optic_type)
        except CatalogError as exc:
            diags.append(_err("layout.reference", str(exc), inst.name))
            continue
        try:
            cp = compile_instance(inst, template, catalog, doc.wavelength)
        except (PlacementError, ExpressionError, CatalogError, TurnError, ValueError) as exc:
            code = "layout.reference" if isinstance(exc, CatalogError) else "layout.element"
            diags.append(_err(code, str(exc), inst.name))
            continue
        compiled.append(cp)
        diags += [d.tagged(inst.name) for d in cp.diagnostics]
    diags += table_checks(compiled, table)
    return freeze(doc, catalog, table, compiled, diags)


def compile_text(text: str, catalog: Catalog | None = None, *, path: str | Path | None = None) -> Scene:
    return compile_document(parse_document(text, path=path), catalog)


def compile_path(path: str | Path, catalog: Catalog | None = None) -> Scene:
    return compile_document(load_document(path), catalog)


# -- table-level checks -------------------------------------------------------------


def table_checks(compiled: list[CompiledPlate], table: tuple[float, float]) -> list[dg.Diagnostic]:
    out: list[dg.Diagnostic] = []
    W, H = table[0] * INCH, table[1] * INCH
    corners = {cp.instance.name: cp.plate.table_corners() for cp in compiled}
    for cp in compiled:
        c = corners[cp.instance.name]
        if any(p.x < -1e-9 or p.y < -1e-9 or p.x > W + 1e-9 or p.y > H + 1e-9 for p in c):
            out.append(_err("layout.bounds", f"plate extends beyond the {table[0]:g} x {table[1]:g} in table", cp.instance.name))
    for i in range(len(compiled)):
        for j in range(i + 1, len(compiled)):
            a, b = compiled[i].instance.name, compiled[j].instance.name
            if convex_overlap(corners[a], corners[b]):
                first, second = sorted((a, b))
                out.append(_err("collide.plate", f"plates {first!r} and {second!r} overlap", f"{first}|{second}"))
    out += handoff_checks(compiled)
    return out


def handoff_checks(compiled: list[CompiledPlate]) -> list[dg.Diagnostic]:
    """Escaping beams that run into another plate must meet one of its entry beams."""
    out = []
    for cp in compiled:
        pose = cp.plate.pose
        for seg in cp.plate.segments():
            if seg.end != "escaped" or seg.ray_end is None:
                continue
            p = pose.apply(seg.ray_end)
            h = normalize_angle(pose.angle + seg.ray_heading)
            target = _first_plate_hit(p, h, cp, compiled)
            if target is None:
                continue
            if not _meets_entry(p, h, target):
                out.append(dg.warning(
                    "rule.handoff",
                    f"beam {seg.source}:{bm.format_index(seg.index)} enters {target.instance.name!r} off its entry beams",
                    f"{cp.instance.name}/{seg.source}:{bm.format_index(seg.index)}",
                ))
    return out


def _first_plate_hit(p: Point2, h: float, own: CompiledPlate, compiled: list[CompiledPlate]):
    best = None
    d = unit(h)
    for cp in compiled:
        if cp is own:
            continue
        inv = cp.plate.pose
        local_p = (p - inv.point).rotate(-inv.angle)
        local_d = d.rotate(-inv.angle)
        t = _ray_box(local_p, local_d, cp.plate.dx, cp.plate.dy)
        if t is not None and (best is None or t < best[0]):
            best = (t, cp)
    return None if best is None else best[1]


def _ray_box(p: Point2, d: Point2, dx: float, dy: float) -> float | None:
    t0, t1 = 0.0, math.inf
    for pc, dc, hi in ((p.x, d.x, dx), (p.y, d.y, dy)):
        if abs(dc) < 1e-15:
            if pc < -1e-9 or pc > hi + 1e-9:
                return None
            continue
        a, b = (0.0 - pc) / dc, (hi - pc) / dc
        if a > b:
            a, b = b, a
        t0, t1 = max(t0, a), min(t1, b)
    return t0 if t0 < t1 else None


def _meets_entry(p: Point2, h: float, target: CompiledPlate) -> bool:
    pose = target.plate.pose
    d = unit(h)
    for src in target.plate.sources:
        q = pose.apply(src.origin)
        qh = normalize_angle(pose.angle + src.heading)
        if abs(math.sin(qh - h)) > 1e-9 or math.cos(qh - h) <= 0:
            continue
        if abs((q - p).cross(d)) <= 1e-6:
            return True
    return False


# -- freezing -----------------------------------------------------------------------


def _pt(p: Point2 | None) -> tuple[float, float] | None:
    return None if p is None else (p.x, p.y)


def _constraint(c) -> tuple[str, float]:
    if isinstance(c, bm.Distance):
        return ("distance", c.d)
    if isinstance(c, bm.AbsX):
        return ("x", c.c)
    return ("y", c.c)


def freeze(doc: LayoutDocument, catalog: Catalog, table, compiled: list[CompiledPlate], diags) -> Scene:
    plates, elements, segments, solids = [], [], [], []
    for cp in compiled:
        pl = cp.plate
        inst = cp.instance
        pose = pl.pose
        plates.append(PlateRecord(
            inst.name, inst.template, inst.optic_type, inst.group, inst.label,
            inst.x, inst.y, inst.angle, pl.dx, pl.dy, pl.dz, pl.gap, pl.optics_dz, cp.scale,
        ))
        for e in pl.placed_elements():
            tp = pose.compose(e.pose)
            parts = tuple(
                PartRecord(pid, part.description, tuple(_pt(pose.apply(c)) for c in corners))
                for (pid, corners), part in zip(e.shapes(), e.spec.chain())
            )
            elements.append(ElementRecord(
                inst.name, e.name, e.spec.id, e.role or "", e.beam.name, e.index, _constraint(e.constraint),
                (e.pose.x, e.pose.y, e.pose.angle), (tp.x, tp.y, tp.angle), parts,
            ))
        for seg in pl.segments():
            segments.append(SegmentRecord(
                inst.name, seg.source, seg.index,
                _pt(pose.apply(seg.origin)), normalize_angle(pose.angle + seg.heading),
                _pt(pose.apply(seg.terminus)) if seg.terminus else None,
                _pt(pose.apply(seg.ray_start)),
                _pt(pose.apply(seg.ray_end)) if seg.ray_end else None,
                normalize_angle(pose.angle + seg.ray_heading),
                seg.ray_state, seg.frequency_offset, seg.end, seg.start_element, seg.end_element,
            ))
        if cp.solid is not None:
            solids.append(cp.solid)
    provenance = {
        "document": hashlib.sha256(doc.source.encode()).hexdigest(),
        "catalog": catalog.digest(),
    }
    for name, digest in sorted(catalog.sources):
        provenance[f"catalog:{name}"] = digest
    return Scene(
        tuple(float(v) for v in table), tuple(plates), tuple(elements), tuple(segments), tuple(solids),
        dg.sort_diagnostics(diags), provenance,
    )
