"""Planar geometry kernel used by the beam tracer and the layout checks.

Lengths are millimetres, angles are radians measured counter-clockwise from
the table's +x axis.  Headings are kept normalized to [0, 2*pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CatalogError, ConstraintError, TurnError

INCH = 25.4

TAU = 2.0 * math.pi

# Multiples of pi/4 are snapped to these exact floats so cardinal routing
# stays bit-exact through repeated reflections.
_EIGHTHS = tuple(k * math.pi / 4.0 for k in range(8))
_SNAP_TOL = 1e-12

_SQRT_HALF = math.sqrt(0.5)
_UNIT = {
    0: (1.0, 0.0),
    1: (_SQRT_HALF, _SQRT_HALF),
    2: (0.0, 1.0),
    3: (-_SQRT_HALF, _SQRT_HALF),
    4: (-1.0, 0.0),
    5: (-_SQRT_HALF, -_SQRT_HALF),
    6: (0.0, -1.0),
    7: (_SQRT_HALF, -_SQRT_HALF),
}

CARDINALS = {"right": 0, "up": 1, "left": 2, "down": 3}


@dataclass(frozen=True)
class Point2:
    """A point (or vector) in the plane, in millimetres."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __add__(self, other: Point2) -> Point2:
        return Point2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Point2) -> Point2:
        return Point2(self.x - other.x, self.y - other.y)

    def __mul__(self, k: float) -> Point2:
        return Point2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __neg__(self) -> Point2:
        return Point2(-self.x, -self.y)

    def dot(self, other: Point2) -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: Point2) -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def rotate(self, angle: float) -> Point2:
        c, s = direction(angle)
        return Point2(c * self.x - s * self.y, s * self.x + c * self.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


ORIGIN = Point2(0.0, 0.0)


def normalize_angle(angle: float) -> float:
    """Wrap ``angle`` into [0, 2*pi), snapping near-multiples of pi/4."""
    a = math.fmod(angle, TAU)
    if a < 0.0:
        a += TAU
    k = round(a / (math.pi / 4.0))
    if abs(a - k * math.pi / 4.0) < _SNAP_TOL:
        return _EIGHTHS[k % 8]
    if a >= TAU:
        a = 0.0
    return a


def wrap_pi(angle: float) -> float:
    """Wrap an angle difference into (-pi, pi]."""
    a = math.fmod(angle, TAU)
    if a <= -math.pi:
        a += TAU
    elif a > math.pi:
        a -= TAU
    return a


def eighth_index(heading: float) -> int | None:
    """Return k when ``heading`` is exactly k*pi/4 after normalization."""
    h = normalize_angle(heading)
    for k, e in enumerate(_EIGHTHS):
        if h == e:
            return k
    return None


def is_cardinal(heading: float, tol: float = 0.0) -> bool:
    h = normalize_angle(heading)
    k = round(h / (math.pi / 2.0))
    return abs(h - k * math.pi / 2.0) <= tol


def direction(heading: float) -> tuple[float, float]:
    """Unit vector for ``heading``; exact for multiples of pi/4."""
    k = eighth_index(heading)
    if k is not None:
        return _UNIT[k]
    return (math.cos(heading), math.sin(heading))


def unit(heading: float) -> Point2:
    c, s = direction(heading)
    return Point2(c, s)


def perp(heading: float) -> Point2:
    """Unit vector 90 degrees counter-clockwise of ``heading``."""
    return unit(heading + math.pi / 2.0)


def heading_of(v: Point2) -> float:
    return normalize_angle(math.atan2(v.y, v.x))


def heading_from_cardinal(name: str) -> float:
    """Map right/up/left/down to 0, pi/2, pi, 3*pi/2."""
    try:
        k = CARDINALS[name]
    except KeyError:
        raise CatalogError(f"unknown cardinal direction {name!r}") from None
    return _EIGHTHS[2 * k]


def cardinal_name(heading: float) -> str | None:
    k = eighth_index(heading)
    if k is None or k % 2:
        return None
    return ("right", "up", "left", "down")[k // 2]


def reverse(heading: float) -> float:
    return normalize_angle(heading + math.pi)


def reflect_direction(incoming: float, mirror_normal: float) -> float:
    """Specular reflection of a heading about a mirror with the given normal.

    Either orientation of the normal gives the same result.
    """
    return normalize_angle(2.0 * mirror_normal + math.pi - incoming)


def _cardinal_index(d: str | float) -> int:
    if isinstance(d, str):
        return CARDINALS[d] if d in CARDINALS else _bad_turn(d)
    k = eighth_index(d)
    if k is None or k % 2:
        raise TurnError(f"heading {d!r} is not cardinal")
    return k // 2


def _bad_turn(d: str) -> int:
    raise TurnError(f"unknown direction {d!r} in turn")


def mirror_normal_for_turn(incoming: str | float, outgoing: str | float) -> float:
    """Normal of a fold mirror that turns ``incoming`` into ``outgoing``.

    The normal bisects the reversed incoming beam and the outgoing beam, so
    it faces the side the beam arrives from.  Only 90 degree folds exist.
    """
    ki = _cardinal_index(incoming)
    ko = _cardinal_index(outgoing)
    kr = (ki + 2) % 4
    diff = (ko - kr) % 4
    if diff == 1:
        n8 = 2 * kr + 1
    elif diff == 3:
        n8 = 2 * kr - 1
    else:
        raise TurnError(f"no fold mirror turns {incoming!r} into {outgoing!r}")
    return _EIGHTHS[n8 % 8]


def parse_turn(text: str) -> tuple[str, str]:
    parts = text.split("-")
    if len(parts) != 2 or any(p not in CARDINALS for p in parts):
        raise TurnError(f"malformed turn {text!r}")
    return parts[0], parts[1]


def intersect_ray_axis(
    origin: Point2, heading: float, *, x: float | None = None, y: float | None = None
) -> Point2:
    """Intersect a ray with the line ``x = c`` or ``y = c``.

    The intersection must lie strictly ahead of ``origin``.
    """
    if (x is None) == (y is None):
        raise ValueError("give exactly one of x= or y=")
    c, s = direction(heading)
    if x is not None:
        if abs(c) < 1e-12:
            raise ConstraintError(f"beam at heading {heading:.6g} never reaches x={x}", kind="unreachable")
        t = (x - origin.x) / c
        hit = Point2(x, origin.y + t * s)
    else:
        if abs(s) < 1e-12:
            raise ConstraintError(f"beam at heading {heading:.6g} never reaches y={y}", kind="unreachable")
        t = (y - origin.y) / s
        hit = Point2(origin.x + t * c, y)
    if not t > 0.0:
        raise ConstraintError(f"constraint lies behind the beam (t={t:.6g})", kind="behind")
    return hit


@dataclass(frozen=True)
class Pose:
    """Rigid placement in the plane: position plus heading."""

    x: float
    y: float
    angle: float = 0.0

    @property
    def point(self) -> Point2:
        return Point2(self.x, self.y)

    def apply(self, p: Point2) -> Point2:
        """Map a point from this pose's local frame to the parent frame."""
        r = p.rotate(self.angle)
        return Point2(self.x + r.x, self.y + r.y)

    def compose(self, inner: Pose) -> Pose:
        p = self.apply(inner.point)
        return Pose(p.x, p.y, normalize_angle(self.angle + inner.angle))


def rect_corners(center: Point2, angle: float, length: float, width: float) -> tuple[Point2, ...]:
    """Corners (counter-clockwise) of a rectangle whose length runs along ``angle``."""
    u = unit(angle)
    v = perp(angle)
    hl, hw = length / 2.0, width / 2.0
    return (
        center - u * hl - v * hw,
        center + u * hl - v * hw,
        center + u * hl + v * hw,
        center - u * hl + v * hw,
    )
