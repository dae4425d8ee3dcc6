"""Beam tracing along placed optics with binary beam indexing.

A beam index is a plain positive ``int`` read as a binary literal: the
source beam is ``0b1`` and a splitter turns index ``i`` into a transmitted
child ``2*i`` and a reflected child ``2*i + 1``.

Each traced run is a :class:`BeamSegment`.  Its ``origin``/``heading`` give
the nominal axis the layout is built along; ``ray_state`` is the paraxial
(offset, slope) of the real ray about that axis.  Placement constraints are
resolved on the axis, interactions happen where the real ray meets an
element's optical surface.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

from . import diagnostics as dg
from .errors import ConstraintError, OpticsError
from .geometry import (
    Point2,
    Pose,
    heading_of,
    intersect_ray_axis,
    normalize_angle,
    perp,
    reflect_direction,
    unit,
    wrap_pi,
)

EPS = 1e-9
DEFAULT_MAX_DEPTH = 16
MAX_INTERACTIONS = 20000


# -- indices -----------------------------------------------------------------


def child_indices(index: int) -> tuple[int, int]:
    """Return the (transmitted, reflected) children of a beam index."""
    if index < 1:
        raise ValueError(f"beam index must be >= 1, got {index}")
    return index * 2, index * 2 + 1


def parent_index(index: int) -> int:
    return index // 2


def index_depth(index: int) -> int:
    """Number of splits between the source beam and ``index``."""
    return index.bit_length() - 1


def is_descendant(index: int, ancestor: int) -> bool:
    """True when ``ancestor`` is ``index`` itself or one of its ancestors."""
    shift = index.bit_length() - ancestor.bit_length()
    return shift >= 0 and index >> shift == ancestor


def format_index(index: int) -> str:
    return bin(index)


def parse_index(text: str) -> int:
    value = int(text, 0)
    if value < 1:
        raise ValueError(f"beam index must be >= 1, got {text}")
    return value


# -- placement constraints ---------------------------------------------------


@dataclass(frozen=True)
class Distance:
    """Place the element ``d`` mm past the previous component."""

    d: float

    def __post_init__(self) -> None:
        if not self.d > 0:
            raise ValueError(f"distance must be positive, got {self.d}")


@dataclass(frozen=True)
class AbsX:
    c: float


@dataclass(frozen=True)
class AbsY:
    c: float


PlacementConstraint = Union[Distance, AbsX, AbsY]


# -- optical behaviors -------------------------------------------------------


@dataclass(frozen=True)
class Mirror:
    pass


@dataclass(frozen=True)
class Splitter:
    pass


@dataclass(frozen=True)
class ThinLens:
    f: float

    def __post_init__(self) -> None:
        if self.f == 0:
            raise ValueError("thin lens focal length must be non-zero")


@dataclass(frozen=True)
class Aom:
    """Acousto-optic modulator.

    ``deflection`` is the diffraction angle per pass (rad), ``shift`` the RF
    frequency (MHz).  The diffracted order is deflected toward the acoustic
    wave, which sits 90 degrees counter-clockwise of the element's facing.
    """

    deflection: float
    shift: float
    order: int = 1
    pass_zeroth: bool = False

    def __post_init__(self) -> None:
        if self.order not in (1, -1):
            raise ValueError("AOM order must be +1 or -1")


@dataclass(frozen=True)
class Grating:
    groove_density: float
    order: int = 1

    def __post_init__(self) -> None:
        if not self.groove_density > 0:
            raise ValueError("groove density must be positive")


@dataclass(frozen=True)
class Inert:
    pass


@dataclass(frozen=True)
class Iris:
    blocked: frozenset = frozenset()


@dataclass(frozen=True)
class Sink:
    pass


OpticalBehavior = Union[Mirror, Splitter, ThinLens, Aom, Grating, Inert, Iris, Sink]

# Behaviors whose optical surface is the reflecting plane (orientation is the
# surface normal); the others face along their orientation.
REFLECTIVE = (Mirror, Splitter, Grating)


def passive(behavior, index: int) -> bool:
    """True when the element leaves the beam untouched."""
    if isinstance(behavior, Inert):
        return True
    return isinstance(behavior, Iris) and index not in behavior.blocked


# -- segments ----------------------------------------------------------------


@dataclass(frozen=True)
class BeamSegment:
    """One straight run of a beam.

    ``end`` records why the run stopped: ``interact`` (continues with the
    same index), ``split``, ``sink``, ``blocked``, ``stray``, ``escaped``,
    ``depth`` or ``open`` (still awaiting placement).
    """

    index: int
    origin: Point2
    heading: float
    terminus: Point2 | None = None
    frequency_offset: float = 0.0
    ray_state: tuple[float, float] = (0.0, 0.0)
    drill_width: float = 0.0
    source: str = ""
    ray_start: Point2 | None = None
    ray_heading: float | None = None
    ray_end: Point2 | None = None
    start_element: str | None = None
    end_element: str | None = None
    end: str = "open"

    def __post_init__(self) -> None:
        if self.ray_start is None:
            y, slope = self.ray_state
            object.__setattr__(self, "ray_start", self.origin + perp(self.heading) * y)
            object.__setattr__(self, "ray_heading", normalize_angle(self.heading + math.atan(slope)))

    @property
    def escaped(self) -> bool:
        return self.end == "escaped"

    def axis_point(self, t: float) -> Point2:
        return self.origin + unit(self.heading) * t


def _child(
    seg: BeamSegment,
    index: int,
    axis_origin: Point2,
    axis_heading: float,
    ray_point: Point2,
    ray_heading: float,
    frequency_offset: float,
    start_element: str | None,
) -> BeamSegment:
    axis_heading = normalize_angle(axis_heading)
    ray_heading = normalize_angle(ray_heading)
    y = (ray_point - axis_origin).dot(perp(axis_heading))
    rel = wrap_pi(ray_heading - axis_heading)
    if abs(rel) >= math.pi / 2:
        raise OpticsError("ray runs backwards relative to its axis")
    return BeamSegment(
        index=index,
        origin=axis_origin,
        heading=axis_heading,
        frequency_offset=frequency_offset,
        ray_state=(y, math.tan(rel)),
        drill_width=seg.drill_width,
        source=seg.source,
        ray_start=ray_point,
        ray_heading=ray_heading,
        start_element=start_element,
    )


def surface_direction(behavior, orientation: float) -> float:
    return normalize_angle(orientation + math.pi / 2)


def ray_surface_hit(
    start: Point2, heading: float, center: Point2, surface: float
) -> tuple[float, float] | None:
    """Ray parameter ``t`` and surface coordinate ``s`` of the crossing.

    Returns ``None`` when the ray runs parallel to the surface line.
    """
    d = unit(heading)
    u = unit(surface)
    den = d.cross(u)
    if abs(den) < 1e-12:
        return None
    w = center - start
    return w.cross(u) / den, w.cross(d) / den


def interact(
    behavior,
    seg: BeamSegment,
    element_pose: Pose | tuple[Point2, float],
    *,
    wavelength: float | None = None,
    element: str | None = None,
) -> list[BeamSegment]:
    """Apply one optical interaction and return the outgoing segments.

    ``element_pose`` is the element's optical center and orientation (the
    surface normal for mirrors, splitters and gratings, the facing direction
    otherwise).  ``wavelength`` is in nanometres and only needed by gratings.
    """
    if isinstance(element_pose, Pose):
        center, orientation = element_pose.point, element_pose.angle
    else:
        center, orientation = element_pose
    hit = ray_surface_hit(seg.ray_start, seg.ray_heading, center, surface_direction(behavior, orientation))
    if hit is None:
        raise OpticsError("beam runs edge-on to the optical surface")
    point = seg.ray_start + unit(seg.ray_heading) * hit[0]
    ray_dir = seg.ray_heading
    freq = seg.frequency_offset
    idx = seg.index

    if isinstance(behavior, Sink):
        return []
    if isinstance(behavior, Iris) and idx in behavior.blocked:
        return []
    if isinstance(behavior, (Inert, Iris)):
        return [_child(seg, idx, center, seg.heading, point, ray_dir, freq, element)]
    if isinstance(behavior, Mirror):
        return [
            _child(
                seg, idx, center,
                reflect_direction(seg.heading, orientation),
                point, reflect_direction(ray_dir, orientation), freq, element,
            )
        ]
    if isinstance(behavior, Splitter):
        t_idx, r_idx = child_indices(idx)
        return [
            _child(seg, t_idx, center, seg.heading, point, ray_dir, freq, element),
            _child(
                seg, r_idx, center,
                reflect_direction(seg.heading, orientation),
                point, reflect_direction(ray_dir, orientation), freq, element,
            ),
        ]
    if isinstance(behavior, ThinLens):
        axis = orientation if math.cos(ray_dir - orientation) > 0 else orientation + math.pi
        rel = wrap_pi(ray_dir - axis)
        if math.cos(rel) < 1e-12:
            raise OpticsError("ray state undefined: beam parallel to lens plane")
        y = (point - center).dot(perp(axis))
        slope = math.tan(rel) - y / behavior.f
        return [_child(seg, idx, center, axis, point, axis + math.atan(slope), freq, element)]
    if isinstance(behavior, Aom):
        sense = 1.0 if math.cos(ray_dir - orientation) > 0 else -1.0
        kick = behavior.order * behavior.deflection * sense
        diffracted_freq = freq + behavior.order * behavior.shift
        if not behavior.pass_zeroth:
            return [_child(seg, idx, center, seg.heading, point, ray_dir + kick, diffracted_freq, element)]
        z_idx, d_idx = child_indices(idx)
        return [
            _child(seg, z_idx, center, seg.heading, point, ray_dir, freq, element),
            _child(seg, d_idx, center, seg.heading, point, ray_dir + kick, diffracted_freq, element),
        ]
    if isinstance(behavior, Grating):
        if wavelength is None:
            raise OpticsError("grating interaction needs a wavelength")
        return [
            _child(
                seg, idx, center,
                grating_direction(seg.heading, orientation, behavior, wavelength),
                point, grating_direction(ray_dir, orientation, behavior, wavelength),
                freq, element,
            )
        ]
    raise TypeError(f"unknown optical behavior {behavior!r}")


def grating_direction(incoming: float, normal: float, grating: Grating, wavelength_nm: float) -> float:
    """Outgoing heading of the configured diffraction order.

    Uses sin(out) = m * lambda * n - sin(in) with both angles measured from
    the grating normal; order 0 is the specular reflection.
    """
    theta_in = wrap_pi(incoming + math.pi - normal)
    s = grating.order * wavelength_nm * 1e-6 * grating.groove_density - math.sin(theta_in)
    if abs(s) > 1.0:
        raise OpticsError(
            f"diffraction order {grating.order} is evanescent (sin = {s:.6f})"
        )
    return normalize_angle(normal + math.asin(s))


# -- tracing -----------------------------------------------------------------


@dataclass(frozen=True)
class BeamSource:
    name: str
    origin: Point2
    heading: float
    drill_width: float = 0.0
    wavelength: float | None = None


@dataclass(frozen=True)
class TraceElement:
    """What the tracer needs to know about one queued element."""

    name: str
    behavior: object
    orientation: float
    aperture: float
    source: str
    index: int
    constraint: PlacementConstraint | None


@dataclass
class BeamTree:
    """All runs traced from one source, grouped by beam index."""

    source: str
    paths: dict[int, list[BeamSegment]] = field(default_factory=dict)

    def add(self, seg: BeamSegment) -> None:
        self.paths.setdefault(seg.index, []).append(seg)

    def indices(self) -> list[int]:
        return sorted(self.paths)

    def segments(self) -> list[BeamSegment]:
        return [s for i in self.indices() for s in self.paths[i]]

    def path(self, index: int) -> list[BeamSegment]:
        return self.paths[index]

    def last(self, index: int) -> BeamSegment:
        return self.paths[index][-1]

    def leaves(self) -> list[int]:
        return [i for i in self.indices() if self.last(i).end != "split"]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BeamTree)
            and self.source == other.source
            and {k: tuple(v) for k, v in self.paths.items()}
            == {k: tuple(v) for k, v in other.paths.items()}
        )


@dataclass
class TraceResult:
    poses: dict[str, Pose]
    trees: dict[str, BeamTree]
    diagnostics: list[dg.Diagnostic]
    clipped: dict[str, float] = field(default_factory=dict)


def _exit_parameter(start: Point2, heading: float, bounds: tuple[float, float, float, float]) -> float:
    x0, y0, x1, y1 = bounds
    d = unit(heading)
    t = math.inf
    for p, c, lo, hi in ((start.x, d.x, x0, x1), (start.y, d.y, y0, y1)):
        if c > 1e-15:
            t = min(t, (hi - p) / c)
        elif c < -1e-15:
            t = min(t, (lo - p) / c)
    return max(t, 0.0)


def _resolve_on_axis(seg: BeamSegment, constraint) -> Point2:
    if isinstance(constraint, Distance):
        return seg.origin + unit(seg.heading) * constraint.d
    if isinstance(constraint, AbsX):
        return intersect_ray_axis(seg.origin, seg.heading, x=constraint.c)
    if isinstance(constraint, AbsY):
        return intersect_ray_axis(seg.origin, seg.heading, y=constraint.c)
    raise ConstraintError(f"element has no placement constraint ({constraint!r})")


def resolve_constraint(seg: BeamSegment, constraint, element: str | None = None) -> Point2:
    """Position of an element placed on the open segment ``seg``."""
    if seg.terminus is not None:
        raise ValueError("segment already terminated")
    try:
        return _resolve_on_axis(seg, constraint)
    except ConstraintError as exc:
        raise ConstraintError(f"{element}: {exc}" if element else str(exc), exc.kind, element) from None


def _project(seg: BeamSegment, p: Point2) -> Point2:
    u = unit(seg.heading)
    return seg.origin + u * (p - seg.origin).dot(u)


def trace(
    sources: Iterable[BeamSource],
    elements: Iterable[TraceElement],
    bounds: tuple[float, float, float, float],
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    wavelength: float | None = None,
) -> TraceResult:
    """Trace every source through the queued elements.

    Open runs are processed first-in first-out; within one run the queued
    elements of its beam index are placed in declaration order, each
    relative to the previous component.  A run also interacts with any
    already placed element whose optical surface it crosses first.  Beams
    that no element is routed onto (stray beams) pass inert optics and stop
    at the first active element they reach.
    """
    sources = list(sources)
    elements = list(elements)
    diags: list[dg.Diagnostic] = []
    queues: dict[tuple[str, int], deque[TraceElement]] = {}
    for el in elements:
        queues.setdefault((el.source, el.index), deque()).append(el)
    routed = {}
    for el in elements:
        routed.setdefault(el.source, set()).add(el.index)

    def planned(source: str, index: int) -> bool:
        return any(is_descendant(d, index) for d in routed.get(source, ()))

    poses: dict[str, Pose] = {}
    placed: list[TraceElement] = []
    trees = {s.name: BeamTree(s.name) for s in sources}
    clipped: dict[str, float] = {}
    wavelengths = {s.name: s.wavelength if s.wavelength is not None else wavelength for s in sources}
    work: deque[BeamSegment] = deque(
        BeamSegment(1, s.origin, normalize_angle(s.heading), drill_width=s.drill_width, source=s.name)
        for s in sources
    )
    budget = MAX_INTERACTIONS
    reached: set[tuple[str, int]] = set()

    def close(seg: BeamSegment, ray_end: Point2, terminus: Point2, end: str, element: str | None) -> None:
        trees[seg.source].add(replace(seg, terminus=terminus, ray_end=ray_end, end=end, end_element=element))

    while work:
        seg = work.popleft()
        key = (seg.source, seg.index)
        reached.add(key)
        if index_depth(seg.index) > max_depth:
            close(seg, seg.ray_start, seg.origin, "depth", None)
            diags.append(dg.warning(
                "trace.depth",
                f"beam {format_index(seg.index)} exceeds {max_depth} splitter generations",
                f"{seg.source}:{format_index(seg.index)}",
            ))
            continue
        is_planned = planned(seg.source, seg.index)
        while True:
            budget -= 1
            if budget < 0:
                diags.append(dg.error("trace.loop", "interaction budget exhausted; optical loop?", seg.source))
                work.clear()
                break
            queue = queues.get(key)
            t_exit = _exit_parameter(seg.ray_start, seg.ray_heading, bounds)

            pending = None
            t_q = math.inf
            if queue:
                el = queue[0]
                try:
                    center = resolve_constraint(seg, el.constraint, el.name)
                except ConstraintError as exc:
                    queue.popleft()
                    diags.append(dg.error("trace.constraint", str(exc), el.name))
                    continue
                hit = ray_surface_hit(
                    seg.ray_start, seg.ray_heading, center, surface_direction(el.behavior, el.orientation)
                )
                if hit is None or hit[0] <= EPS:
                    queue.popleft()
                    diags.append(dg.error("trace.miss", "beam does not reach the element's optical surface", el.name))
                    continue
                pending = (el, center)
                t_q = hit[0]
                if abs(hit[1]) > el.aperture + EPS:
                    clipped[el.name] = hit[1]

            best = None
            for order, other in enumerate(placed):
                pose = poses[other.name]
                hit = ray_surface_hit(
                    seg.ray_start, seg.ray_heading, pose.point, surface_direction(other.behavior, other.orientation)
                )
                if hit is None or hit[0] <= EPS or abs(hit[1]) > other.aperture + EPS:
                    continue
                if hit[0] > t_exit + EPS:
                    continue
                if best is None or hit[0] < best[0] - EPS:
                    best = (hit[0], other, pose)

            if best is not None and best[0] < t_q - EPS:
                t_hit, target, pose = best
            elif pending is not None:
                el, center = pending
                queue.popleft()
                pose = Pose(center.x, center.y, el.orientation)
                poses[el.name] = pose
                placed.append(el)
                target, t_hit = el, t_q
            else:
                end_pt = seg.ray_start + unit(seg.ray_heading) * t_exit
                close(seg, end_pt, _project(seg, end_pt), "escaped", None)
                break

            ray_end = seg.ray_start + unit(seg.ray_heading) * t_hit
            terminus = _project(seg, pose.point)
            if not is_planned and not passive(target.behavior, seg.index):
                close(seg, ray_end, terminus, "stray", target.name)
                break
            try:
                children = interact(
                    target.behavior, seg, pose, wavelength=wavelengths.get(seg.source), element=target.name
                )
            except OpticsError as exc:
                close(seg, ray_end, terminus, "blocked", target.name)
                diags.append(dg.error("trace.optics", str(exc), target.name))
                break
            if not children:
                end = "sink" if isinstance(target.behavior, Sink) else "blocked"
                close(seg, ray_end, terminus, end, target.name)
                break
            if len(children) == 1 and children[0].index == seg.index:
                close(seg, ray_end, terminus, "interact", target.name)
                seg = children[0]
                continue
            close(seg, ray_end, terminus, "split", target.name)
            work.extend(children)
            break

    for (source, index), queue in queues.items():
        for el in queue:
            if (source, index) in reached:
                why = "was reached but ended before this element"
            else:
                why = "never materialized"
            diags.append(dg.error(
                "trace.dangling",
                f"beam index {format_index(index)} on source {source!r} {why}",
                el.name,
            ))
    for name, s in clipped.items():
        diags.append(dg.warning("beam.clip", f"beam strikes {s:+.3f} mm from the optical center", name))
    return TraceResult(poses, trees, diags, clipped)


def ray_heading_between(a: Point2, b: Point2) -> float:
    return heading_of(b - a)
