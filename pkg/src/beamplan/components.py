"""Component catalog: footprints, behaviors, drill features and optic types.

Catalog files are TOML.  Every ``[component.<id>]`` table describes one part;
numeric fields may be expressions over the part's own ``params`` plus the
constants ``inch`` and ``gap``, so a role override such as
``diameter = 25.4`` re-derives the footprint and the holes.  Every
``[optic_type.<id>]`` table is a substitution map from template roles to
parts, with the scale and heights used when a template is instantiated.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Union

from . import beam as bm
from .errors import CatalogError, LittrowError, MeshError
from .expr import ExpressionError, evaluate
from .geometry import INCH, Point2, normalize_angle

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

GAP = INCH / 8.0
CONSTANTS = {"inch": INCH, "mm": 1.0, "gap": GAP}


# -- footprints and drill features --------------------------------------------


@dataclass(frozen=True)
class Rect:
    """Box footprint: ``depth`` runs along the component's facing."""

    width: float
    depth: float
    height: float

    def __post_init__(self) -> None:
        if min(self.width, self.depth, self.height) <= 0:
            raise CatalogError(f"footprint dimensions must be positive: {self}")

    @property
    def plan(self) -> tuple[float, float]:
        return self.depth, self.width


@dataclass(frozen=True)
class Disc:
    """Round optic standing on edge; its thickness runs along the facing."""

    diameter: float
    thickness: float

    def __post_init__(self) -> None:
        if min(self.diameter, self.thickness) <= 0:
            raise CatalogError(f"footprint dimensions must be positive: {self}")

    @property
    def plan(self) -> tuple[float, float]:
        return self.thickness, self.diameter

    @property
    def height(self) -> float:
        return self.diameter

    @property
    def width(self) -> float:
        return self.diameter


Footprint = Union[Rect, Disc]


@dataclass(frozen=True)
class Hole:
    diameter: float
    offset: Point2 = Point2(0.0, 0.0)
    depth: float | None = None
    counterbore: tuple[float, float] | None = None
    thread: str | None = None
    countersink: bool = False

    def __post_init__(self) -> None:
        if not self.diameter > 0:
            raise CatalogError(f"hole diameter must be positive, got {self.diameter}")
        if self.depth is not None and not self.depth > 0:
            raise CatalogError(f"hole depth must be positive, got {self.depth}")
        if self.counterbore is not None:
            d, z = self.counterbore
            if not (d > self.diameter and z > 0):
                raise CatalogError("counterbore must be wider than its hole and have positive depth")

    @property
    def through(self) -> bool:
        return self.depth is None


@dataclass(frozen=True)
class Pocket:
    """Recess around the footprint's bounding box.

    Its depth follows from the optics height unless given explicitly.
    """

    tolerance: float = 0.0
    depth: float | None = None

    def __post_init__(self) -> None:
        if self.tolerance < 0:
            raise CatalogError(f"pocket tolerance must be >= 0, got {self.tolerance}")


DrillFeature = Union[Hole, Pocket]


@dataclass(frozen=True)
class CenterOffset:
    """Datum-to-optical-center offset; ``z`` of ``None`` follows the plate."""

    x: float = 0.0
    y: float = 0.0
    z: float | None = None

    @property
    def xy(self) -> Point2:
        return Point2(self.x, self.y)


@dataclass(frozen=True)
class ComponentSpec:
    id: str
    footprint: Footprint
    behavior: object = bm.Inert()
    optical_center_offset: CenterOffset = CenterOffset()
    drill_features: tuple = ()
    mount_chain: tuple[str, ...] = ()
    params: Mapping[str, float] = field(default_factory=dict)
    description: str = ""
    footprint_center: Point2 = Point2(0.0, 0.0)
    align: str = "facing"
    aperture: float | None = None
    mounts: tuple["ComponentSpec", ...] = ()
    mesh: tuple | None = None

    @property
    def base_id(self) -> str:
        return self.id.split("[", 1)[0]

    @property
    def clear_aperture(self) -> float:
        if self.aperture is not None:
            return self.aperture
        return self.footprint.plan[1] / 2.0

    def chain(self) -> tuple["ComponentSpec", ...]:
        """The optic followed by its mounts, innermost first."""
        return (self,) + self.mounts


# -- behaviors ----------------------------------------------------------------


def _behavior(raw, env) -> object:
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict) or "kind" not in raw:
        raise CatalogError(f"behavior must be a kind name or table, got {raw!r}")
    kind = raw["kind"]
    num = lambda key, default=None: _num(raw.get(key, default), env, key)  # noqa: E731
    try:
        if kind == "mirror":
            return bm.Mirror()
        if kind == "splitter":
            return bm.Splitter()
        if kind == "lens":
            return bm.ThinLens(num("f"))
        if kind == "aom":
            return bm.Aom(
                math.radians(num("deflection_deg")),
                num("shift"),
                int(num("order", 1)),
                _flag(raw.get("pass_zeroth", False), env),
            )
        if kind == "grating":
            return bm.Grating(num("groove_density"), int(num("order", 1)))
        if kind == "inert":
            return bm.Inert()
        if kind == "iris":
            blocked = (int(str(i), 0) if isinstance(i, str) and i[:2] in ("0b", "0x") else int(_num(i, env, "blocked")) for i in raw.get("blocked", ()))
            return bm.Iris(frozenset(i for i in blocked if i >= 1))
        if kind == "sink":
            return bm.Sink()
    except ValueError as exc:
        raise CatalogError(str(exc)) from None
    raise CatalogError(f"unknown behavior kind {kind!r}")


def _flag(value, env) -> bool:
    if isinstance(value, bool):
        return value
    return _num(value, env, "flag") != 0.0


def behavior_from_params(kind: str, **params) -> object:
    return _behavior(dict(params, kind=kind), dict(CONSTANTS))


def _num(value, env, what: str) -> float:
    if value is None:
        raise CatalogError(f"missing numeric field {what!r}")
    try:
        return evaluate(value, env)
    except ExpressionError as exc:
        raise CatalogError(f"{what}: {exc}") from None


# -- Littrow mounts -----------------------------------------------------------


def littrow_angle(wavelength: float, groove_density: float, order: int = 1) -> float:
    """Littrow incidence angle in radians, wavelength in nm, density in lines/mm."""
    if wavelength < 0 or not groove_density > 0 or order < 1:
        raise ValueError("need wavelength >= 0, groove_density > 0 and order >= 1")
    s = order * wavelength * 1e-6 * groove_density / 2.0
    if s > 1.0:
        raise LittrowError(
            f"no Littrow solution: sin(theta) = {s:.6f} for {wavelength} nm at {groove_density} l/mm"
        )
    return math.asin(s)


@dataclass(frozen=True)
class GratingMount:
    """Wedge block that holds a grating at the Littrow angle.

    The block is milled at one set angle and fixed with two countersunk
    screws through its base.
    """

    wavelength: float
    groove_density: float
    order: int
    angle: float
    base: Rect
    grating_size: float
    holes: tuple[Hole, ...]

    @property
    def wedge_angle_deg(self) -> float:
        return math.degrees(self.angle)

    def to_spec(self, *, id: str | None = None, output_order: int = 0) -> ComponentSpec:
        """A catalog spec whose optical surface is the inclined grating face.

        The spec's orientation convention is the grating normal; the wedge
        body trails behind the face.
        """
        sig = id or (
            f"littrow_grating_mount[wavelength={_fmt(self.wavelength)},"
            f"groove_density={_fmt(self.groove_density)},order={self.order}]"
        )
        return ComponentSpec(
            id=sig,
            footprint=self.base,
            behavior=bm.Grating(self.groove_density, output_order),
            optical_center_offset=CenterOffset(self.base.depth / 2.0, 0.0, None),
            drill_features=self.holes,
            params={
                "wavelength": self.wavelength,
                "groove_density": self.groove_density,
                "order": float(self.order),
                "littrow_angle": self.angle,
            },
            description=f"Littrow grating wedge {self.wedge_angle_deg:.3f} deg",
            align="normal",
            aperture=self.grating_size / 2.0,
        )


def generate_grating_mount(
    wavelength: float,
    groove_density: float,
    order: int = 1,
    *,
    grating_size: float = 12.7,
    screw_diameter: float = 3.4,
) -> GratingMount:
    angle = littrow_angle(wavelength, groove_density, order)
    depth = grating_size * math.sin(angle) + 6.0
    width = grating_size + 6.0
    height = grating_size * math.cos(angle) + 6.0
    base = Rect(width=width, depth=depth, height=height)
    pitch = grating_size / 2.0
    holes = tuple(
        Hole(screw_diameter, Point2(0.0, y), depth=None, countersink=True, thread=None)
        for y in (-pitch / 2.0 - 1.0, pitch / 2.0 + 1.0)
    )
    return GratingMount(wavelength, groove_density, order, angle, base, grating_size, holes)


# -- optic-type tables --------------------------------------------------------


@dataclass(frozen=True)
class RoleBinding:
    component: str
    overrides: Mapping[str, float] = field(default_factory=dict)
    mount: str | None = None
    mount_args: Mapping[str, float] = field(default_factory=dict)
    placement: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class OpticTypeTable:
    id: str
    scale: float
    base_dz: float
    optics_dz: float
    beam_width: float
    roles: Mapping[str, RoleBinding]
    description: str = ""

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise CatalogError(f"optic type {self.id!r}: scale must be positive")
        if not self.base_dz > 0:
            raise CatalogError(f"optic type {self.id!r}: base_dz must be positive")


# -- catalog ------------------------------------------------------------------


@dataclass(frozen=True)
class ComponentDef:
    id: str
    raw: Mapping
    origin: str


class Catalog:
    """Immutable id-keyed catalog of component definitions and optic types."""

    def __init__(self, components=(), optic_types=(), sources=()):
        self._defs: dict[str, ComponentDef] = {}
        self._registered: dict[str, ComponentSpec] = {}
        self._types: dict[str, OpticTypeTable] = {}
        self.sources: tuple[tuple[str, str], ...] = tuple(sources)
        for d in components:
            if d.id in self._defs:
                raise CatalogError(f"duplicate component id {d.id!r} ({self._defs[d.id].origin}, {d.origin})")
            self._defs[d.id] = d
        for t in optic_types:
            if t.id in self._types:
                raise CatalogError(f"duplicate optic type id {t.id!r}")
            self._types[t.id] = t
        for d in self._defs.values():
            for m in d.raw.get("mount_chain", ()):
                if m not in self._defs:
                    raise CatalogError(f"component {d.id!r}: mount_chain references unknown id {m!r}")
        for t in self._types.values():
            for role, b in t.roles.items():
                for ref in (b.component, b.mount):
                    if ref is not None and ref not in self._defs:
                        raise CatalogError(f"optic type {t.id!r} role {role!r}: unknown component {ref!r}")
        # build every part once so malformed fields surface at load time
        for cid in self._defs:
            self.spec(cid)

    def __len__(self) -> int:
        return len(self._defs) + len(self._registered)

    def __contains__(self, cid: str) -> bool:
        return cid in self._defs or cid in self._registered

    def ids(self) -> list[str]:
        return sorted(set(self._defs) | set(self._registered))

    def optic_type_ids(self) -> list[str]:
        return sorted(self._types)

    def optic_type(self, tid: str) -> OpticTypeTable:
        try:
            return self._types[tid]
        except KeyError:
            raise CatalogError(f"unknown optic type {tid!r}") from None

    def definition(self, cid: str) -> ComponentDef:
        try:
            return self._defs[cid]
        except KeyError:
            raise CatalogError(f"unknown component id {cid!r}") from None

    def register(self, spec: ComponentSpec) -> None:
        if spec.id in self:
            raise CatalogError(f"duplicate component id {spec.id!r}")
        self._registered[spec.id] = spec

    def merged(self, other: "Catalog") -> "Catalog":
        out = Catalog(
            list(self._defs.values()) + list(other._defs.values()),
            list(self._types.values()) + list(other._types.values()),
            self.sources + other.sources,
        )
        for spec in list(self._registered.values()) + list(other._registered.values()):
            out.register(spec)
        return out

    def digest(self) -> str:
        h = hashlib.sha256()
        for name, digest in sorted(self.sources):
            h.update(f"{name}:{digest}\n".encode())
        return h.hexdigest()

    def spec(
        self,
        cid: str,
        overrides: Mapping[str, float] | None = None,
        mount: str | None = None,
        mount_args: Mapping[str, float] | None = None,
    ) -> ComponentSpec:
        """Build a part with parameter overrides and an optional mount."""
        if cid in self._registered:
            base = self._registered[cid]
            if overrides:
                raise CatalogError(f"registered component {cid!r} takes no overrides")
            chain = (self.spec(mount, mount_args),) if mount else base.mounts
            return replace(base, mounts=chain, mount_chain=tuple(m.id for m in chain))
        d = self.definition(cid)
        spec = _build(d, dict(overrides or {}))
        if mount is not None:
            chain = (self.spec(mount, mount_args),)
        else:
            chain = tuple(self.spec(m) for m in d.raw.get("mount_chain", ()))
        return replace(spec, mounts=chain, mount_chain=tuple(m.id for m in chain))


def _fmt(v: float) -> str:
    return repr(float(v)).removesuffix(".0") if float(v).is_integer() else repr(float(v))


_COMPONENT_KEYS = {
    "description", "footprint", "behavior", "drill", "mount_chain", "params",
    "optical_center", "footprint_center", "align", "aperture", "generator",
}


def _build(d: ComponentDef, overrides: dict) -> ComponentSpec:
    raw = d.raw
    unknown = set(raw) - _COMPONENT_KEYS
    if unknown:
        raise CatalogError(f"component {d.id!r}: unknown key(s) {sorted(unknown)}")
    raw_params = dict(raw.get("params", {}))
    bad = set(overrides) - set(raw_params)
    if bad:
        raise CatalogError(f"component {d.id!r} has no parameter(s) {sorted(bad)}")
    env = dict(CONSTANTS)
    params = {}
    for key, value in raw_params.items():
        params[key] = _num(overrides.get(key, value), env, f"{d.id}.params.{key}")
        env[key] = params[key]
    sig = d.id
    if overrides:
        base_env = dict(CONSTANTS)
        for key, value in raw_params.items():
            base_env[key] = _num(value, base_env, key)
        changed = sorted(k for k in overrides if params[k] != base_env[k])
        if changed:
            sig += "[" + ",".join(f"{k}={_fmt(params[k])}" for k in changed) + "]"

    if raw.get("generator") == "littrow":
        mount = generate_grating_mount(
            params["wavelength"], params["groove_density"], int(params.get("order", 1)),
            grating_size=params.get("grating_size", 12.7),
        )
        spec = mount.to_spec(id=sig, output_order=int(params.get("output_order", 0)))
        return replace(spec, params=params, description=raw.get("description", spec.description))
    if "generator" in raw:
        raise CatalogError(f"component {d.id!r}: unknown generator {raw['generator']!r}")

    fp = raw.get("footprint")
    if not isinstance(fp, dict):
        raise CatalogError(f"component {d.id!r}: missing footprint table")
    shape = fp.get("shape", "rect")
    if shape == "rect":
        footprint = Rect(*(_num(fp.get(k), env, f"{d.id}.footprint.{k}") for k in ("width", "depth", "height")))
    elif shape == "disc":
        footprint = Disc(*(_num(fp.get(k), env, f"{d.id}.footprint.{k}") for k in ("diameter", "thickness")))
    else:
        raise CatalogError(f"component {d.id!r}: unknown footprint shape {shape!r}")

    oc = raw.get("optical_center", [0, 0, None])
    if not isinstance(oc, list) or len(oc) not in (2, 3):
        raise CatalogError(f"component {d.id!r}: optical_center must be [x, y] or [x, y, z]")
    z = oc[2] if len(oc) == 3 else None
    center = CenterOffset(
        _num(oc[0], env, "optical_center.x"),
        _num(oc[1], env, "optical_center.y"),
        None if z in (None, "adaptive") else _num(z, env, "optical_center.z"),
    )
    fc = raw.get("footprint_center", [0, 0])
    drills = tuple(_drill(item, env, d.id) for item in raw.get("drill", ()))
    align = raw.get("align", "facing")
    if align not in ("facing", "normal"):
        raise CatalogError(f"component {d.id!r}: align must be 'facing' or 'normal'")
    aperture = raw.get("aperture")
    return ComponentSpec(
        id=sig,
        footprint=footprint,
        behavior=_behavior(raw.get("behavior", "inert"), env),
        optical_center_offset=center,
        drill_features=drills,
        mount_chain=tuple(raw.get("mount_chain", ())),
        params=params,
        description=raw.get("description", ""),
        footprint_center=Point2(_num(fc[0], env, "footprint_center.x"), _num(fc[1], env, "footprint_center.y")),
        align=align,
        aperture=None if aperture is None else _num(aperture, env, "aperture"),
    )


def _drill(item, env, cid: str) -> DrillFeature:
    if not isinstance(item, dict):
        raise CatalogError(f"component {cid!r}: drill entries must be tables")
    kind = item.get("type", "hole")
    if kind == "pocket":
        depth = item.get("depth")
        return Pocket(
            _num(item.get("tolerance", 0), env, "pocket.tolerance"),
            None if depth is None else _num(depth, env, "pocket.depth"),
        )
    if kind != "hole":
        raise CatalogError(f"component {cid!r}: unknown drill type {kind!r}")
    known = {"type", "diameter", "x", "y", "depth", "counterbore", "thread", "countersink"}
    if set(item) - known:
        raise CatalogError(f"component {cid!r}: unknown drill key(s) {sorted(set(item) - known)}")
    depth = item.get("depth", "through")
    cb = item.get("counterbore")
    return Hole(
        diameter=_num(item.get("diameter"), env, "hole.diameter"),
        offset=Point2(_num(item.get("x", 0), env, "hole.x"), _num(item.get("y", 0), env, "hole.y")),
        depth=None if depth == "through" else _num(depth, env, "hole.depth"),
        counterbore=None if cb is None else (_num(cb[0], env, "counterbore"), _num(cb[1], env, "counterbore")),
        thread=item.get("thread"),
        countersink=bool(item.get("countersink", False)),
    )


def _role(raw, env, tid: str, role: str) -> RoleBinding:
    if isinstance(raw, str):
        raw = {"component": raw}
    known = {"component", "overrides", "mount", "mount_args", "placement"}
    if set(raw) - known:
        raise CatalogError(f"optic type {tid!r} role {role!r}: unknown key(s) {sorted(set(raw) - known)}")
    if "component" not in raw:
        raise CatalogError(f"optic type {tid!r} role {role!r}: missing component")
    placement = {k: _num(v, env, f"{role}.placement.{k}") for k, v in raw.get("placement", {}).items()}
    if set(placement) - {"distance", "x", "y"} or len(placement) > 1:
        raise CatalogError(f"optic type {tid!r} role {role!r}: placement takes one of distance, x, y")
    return RoleBinding(
        component=raw["component"],
        overrides={k: _num(v, env, k) for k, v in raw.get("overrides", {}).items()},
        mount=raw.get("mount"),
        mount_args={k: _num(v, env, k) for k, v in raw.get("mount_args", {}).items()},
        placement=placement,
    )


def _optic_type(tid: str, raw: Mapping) -> OpticTypeTable:
    env = dict(CONSTANTS)
    known = {"scale", "base_dz", "optics_dz", "beam_width", "roles", "description"}
    if set(raw) - known:
        raise CatalogError(f"optic type {tid!r}: unknown key(s) {sorted(set(raw) - known)}")
    vals = {k: _num(raw.get(k), env, f"{tid}.{k}") for k in ("scale", "base_dz", "optics_dz", "beam_width")}
    roles = {r: _role(b, env, tid, r) for r, b in raw.get("roles", {}).items()}
    return OpticTypeTable(tid, roles=roles, description=raw.get("description", ""), **vals)


def _parse(text: str, origin: str):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise CatalogError(f"{origin}: {exc}") from None
    unknown = set(data) - {"component", "optic_type"}
    if unknown:
        raise CatalogError(f"{origin}: unknown top-level section(s) {sorted(unknown)}")
    comps = [ComponentDef(cid, raw, origin) for cid, raw in data.get("component", {}).items()]
    types = [_optic_type(tid, raw) for tid, raw in data.get("optic_type", {}).items()]
    digest = hashlib.sha256(text.encode()).hexdigest()
    return comps, types, [(Path(origin).name, digest)]


def parse_catalog_text(text: str, origin: str = "<string>") -> Catalog:
    return Catalog(*_parse(text, origin))


def load_catalog(paths: Iterable[str | os.PathLike]) -> Catalog:
    """Load and merge catalog files; duplicate ids across files are errors."""
    comps, types, sources = [], [], []
    for p in sorted({os.fspath(p) for p in paths}):
        try:
            text = Path(p).read_text(encoding="utf-8")
        except OSError as exc:
            raise CatalogError(f"cannot read catalog {p}: {exc.strerror}") from None
        c, t, src = _parse(text, p)
        comps += c
        types += t
        sources += src
    comps.sort(key=lambda d: (d.id, d.origin))
    return Catalog(comps, types, sources)


def bundled_catalog_path() -> Path:
    return Path(str(resources.files("beamplan") / "data" / "catalog.toml"))


_BUNDLED: Catalog | None = None


def bundled_catalog() -> Catalog:
    global _BUNDLED
    if _BUNDLED is None:
        _BUNDLED = load_catalog([bundled_catalog_path()])
    return _BUNDLED


def resolve_role(table: OpticTypeTable, role: str, catalog: Catalog | None = None) -> ComponentSpec:
    """Concrete part selected by an optic-type table for a template role."""
    catalog = catalog or bundled_catalog()
    try:
        b = table.roles[role]
    except KeyError:
        raise CatalogError(f"optic type {table.id!r} has no role {role!r}") from None
    return catalog.spec(b.component, b.overrides, b.mount, b.mount_args)


# -- mesh registration --------------------------------------------------------


def read_stl(path: str | os.PathLike) -> list[tuple[tuple[float, float, float], ...]]:
    """Triangles of a binary or ASCII STL file."""
    data = Path(path).read_bytes()
    if len(data) >= 84:
        (n,) = struct.unpack_from("<I", data, 80)
        if len(data) == 84 + 50 * n:
            tris = []
            for i in range(n):
                v = struct.unpack_from("<12f", data, 84 + 50 * i)
                tris.append((v[3:6], v[6:9], v[9:12]))
            return tris
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        raise MeshError(f"{path}: not a well-formed STL file") from None
    if not text.lstrip().startswith("solid"):
        raise MeshError(f"{path}: not a well-formed STL file")
    verts = []
    for line in text.splitlines():
        parts = line.split()
        if parts and parts[0] == "vertex":
            try:
                verts.append(tuple(float(x) for x in parts[1:4]))
            except ValueError:
                raise MeshError(f"{path}: bad vertex line {line.strip()!r}") from None
    if len(verts) % 3:
        raise MeshError(f"{path}: vertex count is not a multiple of 3")
    return [tuple(verts[i : i + 3]) for i in range(0, len(verts), 3)]


def register_mesh_component(
    mesh_file: str | os.PathLike,
    origin_offset: tuple[float, float, float],
    front_heading: float,
    drill_features: Iterable[DrillFeature] = (),
    *,
    id: str | None = None,
    behavior=bm.Inert(),
    catalog: Catalog | None = None,
) -> ComponentSpec:
    """Turn an STL part into a catalog entry.

    ``origin_offset`` is the datum (the optical center) in mesh coordinates
    and ``front_heading`` the mesh direction that becomes the part's facing.
    """
    tris = read_stl(mesh_file)
    pts = [p for t in tris for p in t]
    if not pts:
        raise MeshError(f"{mesh_file}: empty mesh")
    ox, oy, oz = origin_offset
    c, s = math.cos(-front_heading), math.sin(-front_heading)

    def tf(p):
        x, y = p[0] - ox, p[1] - oy
        return (_clean(c * x - s * y), _clean(s * x + c * y), p[2] - oz)

    moved = tuple(tuple(tf(p) for p in t) for t in tris)
    xs, ys, zs = zip(*(p for t in moved for p in t))
    dx, dy, dz = max(xs) - min(xs), max(ys) - min(ys), max(zs) - min(zs)
    if min(dx, dy, dz) <= 1e-12:
        raise MeshError(f"{mesh_file}: degenerate bounding box {dx} x {dy} x {dz}")
    spec = ComponentSpec(
        id=id or Path(mesh_file).stem,
        footprint=Rect(width=dy, depth=dx, height=dz),
        behavior=behavior,
        optical_center_offset=CenterOffset(0.0, 0.0, -min(zs)),
        drill_features=tuple(drill_features),
        footprint_center=Point2((max(xs) + min(xs)) / 2.0, (max(ys) + min(ys)) / 2.0),
        description=f"registered from {Path(mesh_file).name}",
        mesh=moved,
        params={"front_heading": normalize_angle(front_heading)},
    )
    if catalog is not None:
        catalog.register(spec)
    return spec


def _clean(v: float) -> float:
    r = round(v)
    return float(r) if abs(v - r) < 1e-12 else v
