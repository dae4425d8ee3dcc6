"""Baseplates: element placement along beams, lints, collisions and solids.

Plate coordinates put the origin at the plate's lower-left corner with +x
along ``dx``.  The usable outline is the plate rectangle inset by ``gap``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from shapely import Polygon, box
from shapely.geometry import LineString

from . import beam as bm
from . import diagnostics as dg
from .components import GAP, ComponentSpec, Hole, Pocket
from .errors import PlacementError
from .geometry import (
    CARDINALS,
    INCH,
    Point2,
    Pose,
    heading_from_cardinal,
    is_cardinal,
    mirror_normal_for_turn,
    normalize_angle,
    parse_turn,
    rect_corners,
    unit,
    wrap_pi,
)

QUARTER = math.pi / 4.0
CIRCLE_SEGMENTS = 64
GRID_HOLE = 6.6
GRID_COUNTERBORE = 11.0
GRID_COUNTERBORE_DEPTH = 6.5
EDGE_TOL = 1e-9


@dataclass(frozen=True)
class BeamHandle:
    plate: str
    name: str


@dataclass
class PlacedElement:
    name: str
    spec: ComponentSpec
    beam: BeamHandle
    index: int
    constraint: bm.PlacementConstraint
    facing: float
    axis: float
    dz: float = 0.0
    role: str | None = None
    pose: Pose | None = None

    @property
    def placed(self) -> bool:
        return self.pose is not None

    def part_angle(self, part: ComponentSpec) -> float:
        return self.axis if part.align == "normal" else self.facing

    def part_poses(self) -> list[tuple[ComponentSpec, Pose]]:
        """Datum pose of the optic and each of its mounts."""
        if self.pose is None:
            return []
        center = self.pose.point
        out = []
        for part in self.spec.chain():
            a = self.part_angle(part)
            datum = center - part.optical_center_offset.xy.rotate(a)
            out.append((part, Pose(datum.x, datum.y, a)))
        return out

    def shapes(self) -> list[tuple[str, tuple[Point2, ...]]]:
        """Plan-view rectangles (part id, corners) of the optic and its mounts."""
        out = []
        for part, pose in self.part_poses():
            length, width = part.footprint.plan
            c = pose.apply(part.footprint_center)
            out.append((part.id, rect_corners(c, pose.angle, length, width)))
        return out

    def optical_height(self, optics_dz: float) -> float:
        z = optics_dz
        if self.spec.mounts and self.spec.mounts[-1].optical_center_offset.z is not None:
            z = self.spec.mounts[-1].optical_center_offset.z
        return z + self.dz


def element_angles(spec: ComponentSpec, angle) -> tuple[float, float]:
    """(facing, optical axis) for a cardinal name, a turn, or radians.

    Splitters reflect a beam travelling along their facing 90 degrees
    counter-clockwise, so their surface normal trails the facing by 45
    degrees.  For a turn the normal comes from the fold table and the
    facing is derived from it.
    """
    split = isinstance(spec.behavior, bm.Splitter)
    if isinstance(angle, str):
        if angle in CARDINALS:
            facing = heading_from_cardinal(angle)
        else:
            normal = mirror_normal_for_turn(*parse_turn(angle))
            return (normalize_angle(normal + QUARTER) if split else normal), normal
    else:
        facing = normalize_angle(float(angle))
    return facing, (normalize_angle(facing - QUARTER) if split else facing)


class Baseplate:
    def __init__(
        self,
        dx: float,
        dy: float,
        dz: float,
        *,
        x: float = 0.0,
        y: float = 0.0,
        angle: float = 0.0,
        gap: float = GAP,
        optics_dz: float = 0.0,
        name: str = "plate",
        label: str = "",
        wavelength: float | None = None,
    ):
        if min(dx, dy, dz) <= 0:
            raise PlacementError(f"plate {name!r}: dimensions must be positive")
        if gap < 0 or 2 * gap >= min(dx, dy):
            raise PlacementError(f"plate {name!r}: gap {gap} does not fit the plate")
        self.dx, self.dy, self.dz = float(dx), float(dy), float(dz)
        self.x, self.y, self.angle = float(x), float(y), normalize_angle(angle)
        self.gap = float(gap)
        self.optics_dz = float(optics_dz)
        self.name = name
        self.label = label
        self.wavelength = wavelength
        self.sources: list[bm.BeamSource] = []
        self.elements: list[PlacedElement] = []
        self.result: bm.TraceResult | None = None

    # -- frames -------------------------------------------------------------

    @property
    def pose(self) -> Pose:
        """Plate frame in table millimetres (position given in inches)."""
        return Pose(self.x * INCH, self.y * INCH, self.angle)

    def to_table(self, p: Point2) -> Point2:
        return self.pose.apply(p)

    def outline(self) -> Polygon:
        g = self.gap
        return box(g, g, self.dx - g, self.dy - g)

    def table_corners(self) -> tuple[Point2, ...]:
        c = rect_corners(Point2(self.dx / 2, self.dy / 2), 0.0, self.dx, self.dy)
        return tuple(self.to_table(p) for p in c)

    # -- construction -------------------------------------------------------

    def add_beam_path(
        self, x: float, y: float, angle: float, drill_width: float = 0.0, name: str | None = None
    ) -> BeamHandle:
        if not (0.0 <= x <= self.dx and 0.0 <= y <= self.dy):
            raise PlacementError(f"beam origin ({x:g}, {y:g}) lies outside plate {self.name!r}")
        if drill_width < 0:
            raise PlacementError("drill_width must be >= 0")
        name = name or f"beam{len(self.sources) + 1}"
        if any(s.name == name for s in self.sources):
            raise PlacementError(f"duplicate beam name {name!r} on plate {self.name!r}")
        self.sources.append(bm.BeamSource(name, Point2(x, y), normalize_angle(angle), drill_width))
        self.result = None
        return BeamHandle(self.name, name)

    def place_element_along_beam(
        self,
        name: str,
        spec: ComponentSpec,
        beam: BeamHandle,
        index: int = 1,
        *,
        distance: float | None = None,
        x: float | None = None,
        y: float | None = None,
        angle: str | float = 0.0,
        dz: float = 0.0,
        role: str | None = None,
    ) -> PlacedElement:
        if any(e.name == name for e in self.elements):
            raise PlacementError(f"duplicate element name {name!r} on plate {self.name!r}")
        if beam.plate != self.name or not any(s.name == beam.name for s in self.sources):
            raise PlacementError(f"unknown beam {beam.name!r} for element {name!r}")
        if index < 1:
            raise PlacementError(f"element {name!r}: beam index must be >= 1")
        given = [(k, v) for k, v in (("distance", distance), ("x", x), ("y", y)) if v is not None]
        if len(given) != 1:
            raise PlacementError(f"element {name!r} needs exactly one of distance=, x=, y=")
        kind, value = given[0]
        try:
            constraint = {"distance": bm.Distance, "x": bm.AbsX, "y": bm.AbsY}[kind](float(value))
        except ValueError as exc:
            raise PlacementError(f"element {name!r}: {exc}") from None
        facing, axis = element_angles(spec, angle)
        el = PlacedElement(name, spec, beam, index, constraint, facing, axis, dz, role)
        self.elements.append(el)
        self.result = None
        return el

    def element(self, name: str) -> PlacedElement:
        for e in self.elements:
            if e.name == name:
                return e
        raise KeyError(name)

    # -- tracing ------------------------------------------------------------

    def trace(self, max_depth: int = bm.DEFAULT_MAX_DEPTH) -> bm.TraceResult:
        queued = [
            bm.TraceElement(
                e.name, e.spec.behavior, e.axis, e.spec.clear_aperture, e.beam.name, e.index, e.constraint
            )
            for e in self.elements
        ]
        result = bm.trace(
            self.sources, queued, (0.0, 0.0, self.dx, self.dy),
            max_depth=max_depth, wavelength=self.wavelength,
        )
        for e in self.elements:
            e.pose = result.poses.get(e.name)
        self.result = result
        return result

    def traced(self) -> bm.TraceResult:
        if self.result is None:
            self.trace()
        return self.result

    def segments(self) -> list[bm.BeamSegment]:
        res = self.traced()
        return [s for src in self.sources for s in res.trees[src.name].segments()]

    def placed_elements(self) -> list[PlacedElement]:
        self.traced()
        return [e for e in self.elements if e.placed]


# -- design rules ---------------------------------------------------------------


def check_design_rules(plate: Baseplate) -> list[dg.Diagnostic]:
    """Layout conventions: one beam height, grid-aligned beams, one-way branching."""
    res = plate.traced()
    out: list[dg.Diagnostic] = []

    heights = {e.name: e.optical_height(plate.optics_dz) for e in plate.placed_elements()}
    if len({round(h, 9) for h in heights.values()}) > 1:
        odd = sorted(n for n, h in heights.items() if abs(h - plate.optics_dz) > 1e-9) or sorted(heights)
        levels = ", ".join(f"{h:g}" for h in sorted({round(h, 9) for h in heights.values()}))
        out.append(dg.warning("rule.height", f"optical centers at several heights ({levels} mm)", odd[0]))

    for src in plate.sources:
        tree = res.trees[src.name]
        for index in tree.indices():
            for seg in tree.path(index):
                if not is_cardinal(plate.angle + seg.heading, 1e-9):
                    out.append(dg.warning(
                        "rule.grid",
                        f"beam runs at {math.degrees(normalize_angle(plate.angle + seg.heading)):.4f} deg, off the table grid",
                        f"{src.name}:{bm.format_index(index)}",
                    ))
                    break

        senses = {}
        for index in tree.indices():
            if index & (index - 1) or tree.last(index).end != "split":
                continue
            t_idx, r_idx = bm.child_indices(index)
            if r_idx not in tree.paths:
                continue
            turn = wrap_pi(tree.path(r_idx)[0].heading - tree.last(index).heading)
            if abs(turn) > 1e-9 and abs(abs(turn) - math.pi) > 1e-9:
                senses.setdefault("left" if turn > 0 else "right", tree.last(index).end_element)
        if len(senses) > 1:
            out.append(dg.warning(
                "rule.branching",
                "main beam branches to both sides (" + ", ".join(f"{k}: {v}" for k, v in sorted(senses.items())) + ")",
                src.name,
            ))
    return out


# -- collisions -----------------------------------------------------------------


def _axes(poly: Sequence[Point2]) -> list[Point2]:
    n = len(poly)
    out = []
    for i in range(n if n > 2 else 1):
        e = poly[(i + 1) % n] - poly[i]
        L = e.norm()
        if L > 0:
            out.append(Point2(-e.y / L, e.x / L))
    return out


def _project(poly, axis: Point2) -> tuple[float, float]:
    vals = [p.dot(axis) for p in poly]
    return min(vals), max(vals)


def convex_overlap(a: Sequence[Point2], b: Sequence[Point2], eps: float = 1e-9) -> bool:
    """Separating-axis test; touching shapes (penetration <= eps) do not overlap."""
    for axis in _axes(a) + _axes(b):
        if _separated(*_project(a, axis), *_project(b, axis), eps):
            return False
    return True


def _separated(a0: float, a1: float, b0: float, b1: float, eps: float) -> bool:
    # a segment projects to a point on its own normal; it only cuts the other
    # shape when that point lies strictly inside the other interval
    if a1 - a0 <= eps:
        return not (b0 + eps < a0 and a1 < b1 - eps)
    if b1 - b0 <= eps:
        return not (a0 + eps < b0 and b1 < a1 - eps)
    return min(a1, b1) - max(a0, b0) <= eps


def _inside(poly, x0, y0, x1, y1) -> bool:
    return all(x0 - EDGE_TOL <= p.x <= x1 + EDGE_TOL and y0 - EDGE_TOL <= p.y <= y1 + EDGE_TOL for p in poly)


def _bbox(poly):
    xs = [p.x for p in poly]
    ys = [p.y for p in poly]
    return min(xs), min(ys), max(xs), max(ys)


def detect_collisions(plate: Baseplate) -> list[dg.Diagnostic]:
    """Footprint overlaps, beams through non-target parts, parts over the edge."""
    elements = plate.placed_elements()
    shapes = [(e.name, [s for _, s in e.shapes()]) for e in elements]
    boxes = {name: [_bbox(s) for s in polys] for name, polys in shapes}
    out: list[dg.Diagnostic] = []

    for i in range(len(shapes)):
        na, pa = shapes[i]
        for j in range(i + 1, len(shapes)):
            nb, pb = shapes[j]
            if any(
                _boxes_meet(ba, bb) and convex_overlap(sa, sb)
                for sa, ba in zip(pa, boxes[na])
                for sb, bb in zip(pb, boxes[nb])
            ):
                first, second = sorted((na, nb))
                out.append(dg.error("collide.footprint", f"footprints of {first!r} and {second!r} overlap", f"{first}|{second}"))

    for seg in plate.segments():
        a, b = seg.ray_start, seg.ray_end
        if a is None or b is None or (b - a).norm() <= EDGE_TOL:
            continue
        line = (a, b)
        lb = _bbox(line)
        for name, polys in shapes:
            if name in (seg.start_element, seg.end_element):
                continue
            if any(_boxes_meet(lb, bx) and convex_overlap(line, s) for s, bx in zip(polys, boxes[name])):
                out.append(dg.error(
                    "collide.beam",
                    f"beam {seg.source}:{bm.format_index(seg.index)} passes through {name!r}",
                    name,
                ))

    g = plate.gap
    for name, polys in shapes:
        if not all(_inside(s, g, g, plate.dx - g, plate.dy - g) for s in polys):
            out.append(dg.warning("collide.edge", f"{name!r} extends past the usable plate outline", name))
    return out


def _boxes_meet(a, b) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


# -- solids -----------------------------------------------------------------------


@dataclass(frozen=True)
class SolidFeature:
    """One subtracted feature in plate coordinates.

    Holes carry a center and diameters; pockets and channels carry their
    (already clipped) outline as a coordinate ring.  ``depth`` is measured
    down from the top surface, ``None`` meaning through.
    """

    kind: str  # grid | hole | pocket | channel
    element: str = ""
    depth: float | None = None
    center: Point2 | None = None
    diameter: float | None = None
    counterbore: tuple[float, float] | None = None
    thread: str | None = None
    countersink: bool = False
    ring: tuple[tuple[float, float], ...] = ()

    def cuts(self, thickness: float) -> list[tuple[Polygon, float]]:
        """(shape, depth) pairs removed from the top surface."""
        depth = thickness if self.depth is None else min(self.depth, thickness)
        if self.center is not None:
            out = [(circle(self.center, self.diameter), depth)]
            if self.counterbore is not None:
                out.append((circle(self.center, self.counterbore[0]), min(self.counterbore[1], depth)))
            return out
        return [(Polygon(self.ring), depth)]


@dataclass(frozen=True)
class Solid:
    """2.5D plate: outline box extruded to ``thickness`` minus vertical cuts."""

    name: str
    bounds: tuple[float, float, float, float]
    thickness: float
    features: tuple[SolidFeature, ...]

    @property
    def outline(self) -> Polygon:
        return box(*self.bounds)

    def count(self, kind: str) -> int:
        return sum(1 for f in self.features if f.kind == kind)

    @property
    def holes(self) -> tuple[SolidFeature, ...]:
        return tuple(f for f in self.features if f.kind in ("grid", "hole"))

    def through_holes(self) -> int:
        return sum(1 for f in self.holes if f.depth is None)


def circle(center: Point2, diameter: float) -> Polygon:
    r = diameter / 2.0
    n = CIRCLE_SEGMENTS
    return Polygon(
        [(center.x + r * math.cos(2 * math.pi * k / n), center.y + r * math.sin(2 * math.pi * k / n)) for k in range(n)]
    )


def _hole_feature(hole: Hole, center: Point2, dz: float, element: str, kind: str = "hole") -> SolidFeature:
    depth = None if hole.depth is None or hole.depth >= dz else hole.depth
    cb = None
    if hole.counterbore is not None:
        cb_d, cb_depth = hole.counterbore
        cb = (cb_d, min(cb_depth, dz if depth is None else depth))
    return SolidFeature(kind, element, depth, center, hole.diameter, cb, hole.thread, hole.countersink)


def _ring(shape) -> tuple[tuple[float, float], ...] | None:
    if shape.is_empty or shape.area <= 1e-12 or shape.geom_type != "Polygon":
        return None
    return tuple((float(x), float(y)) for x, y in list(shape.exterior.coords)[:-1])


def build_solid(plate: Baseplate, *, grid: bool = True) -> Solid:
    """Subtractive plate description: element drills, pockets, channels, mount grid.

    Raises ``PlacementError`` when a hole leaves the outline; pockets and
    channels are clipped to it.
    """
    outline = plate.outline()
    dz = plate.dz
    features: list[SolidFeature] = []

    for e in plate.placed_elements():
        for part, pose in e.part_poses():
            for feat in part.drill_features:
                if isinstance(feat, Hole):
                    c = pose.apply(feat.offset)
                    if not outline.contains(circle(c, feat.diameter)):
                        raise PlacementError(
                            f"hole of {e.name!r} at ({c.x:.3f}, {c.y:.3f}) lies outside the plate outline"
                        )
                    features.append(_hole_feature(feat, c, dz, e.name))
                elif isinstance(feat, Pocket) and part is e.spec and not e.spec.mounts:
                    depth = feat.depth
                    if depth is None:
                        z = part.optical_center_offset.z or 0.0
                        depth = z - plate.optics_dz - e.dz
                    if depth <= 0:
                        continue
                    length, width = part.footprint.plan
                    corners = rect_corners(
                        pose.apply(part.footprint_center), pose.angle,
                        length + 2 * feat.tolerance, width + 2 * feat.tolerance,
                    )
                    ring = _ring(Polygon([p.as_tuple() for p in corners]).intersection(outline))
                    if ring:
                        features.append(SolidFeature("pocket", e.name, None if depth >= dz else depth, ring=ring))

    if plate.optics_dz < 0:
        widths = {s.name: s.drill_width for s in plate.sources}
        for seg in plate.segments():
            w = widths[seg.source]
            if w <= 0 or seg.terminus is None or (seg.terminus - seg.origin).norm() <= EDGE_TOL:
                continue
            strip = LineString([seg.origin.as_tuple(), seg.terminus.as_tuple()]).buffer(w / 2.0, cap_style="flat")
            ring = _ring(strip.intersection(outline))
            if ring:
                depth = -plate.optics_dz + w / 2.0
                features.append(SolidFeature(
                    "channel", f"{seg.source}:{bm.format_index(seg.index)}", None if depth >= dz else depth, ring=ring,
                ))

    if grid:
        features = _grid_holes(plate, outline, features) + features
    return Solid(plate.name, tuple(float(v) for v in outline.bounds), dz, tuple(features))


def _grid_holes(plate: Baseplate, outline: Polygon, features: list[SolidFeature]) -> list[SolidFeature]:
    """Mounting holes on the 1-inch pattern wherever nothing else sits."""
    occupied = [Polygon([p.as_tuple() for p in s]) for e in plate.placed_elements() for _, s in e.shapes()]
    occupied += [shape for f in features for shape, _ in f.cuts(plate.dz)]
    hole = Hole(GRID_HOLE, counterbore=(GRID_COUNTERBORE, min(GRID_COUNTERBORE_DEPTH, plate.dz / 2.0)))
    inner = outline.buffer(-1.0)
    out = []
    nx = int(math.floor(plate.dx / INCH + 1e-9))
    ny = int(math.floor(plate.dy / INCH + 1e-9))
    for i in range(1, nx + 1):
        for j in range(1, ny + 1):
            c = Point2(i * INCH, j * INCH)
            ring = circle(c, GRID_COUNTERBORE)
            if inner.is_empty or not inner.contains(ring):
                continue
            if any(ring.intersects(o) for o in occupied):
                continue
            out.append(_hole_feature(hole, c, plate.dz, "", kind="grid"))
    return out
