"""Watertight triangle meshes for 2.5D plate solids, plus binary STL I/O.

A plate is a stack of horizontal slabs.  Between two consecutive cut depths
the cross-section is constant: the outline minus every cut reaching deeper.
The surface is the top section, the exposed floor of each deeper section,
the bottom section, and vertical walls around every section ring.  Every
ring is subdivided at every boundary vertex of every level so neighbouring
faces always share edges (no T-junctions).
"""

from __future__ import annotations

import io
import struct
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import shapely
from shapely import Polygon, STRtree

from .baseplate import Solid
from .errors import MeshError

GRID = 1e-4
ON_EDGE = 1e-4
HEADER = b"beamplan binary STL"


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (n, 3) float64
    faces: np.ndarray  # (m, 3) int64, counter-clockwise seen from outside

    @property
    def triangle_count(self) -> int:
        return int(len(self.faces))

    def edges(self) -> dict[tuple[int, int], int]:
        """Directed edge -> number of occurrences."""
        counts: dict[tuple[int, int], int] = defaultdict(int)
        for a, b, c in self.faces.tolist():
            counts[(a, b)] += 1
            counts[(b, c)] += 1
            counts[(c, a)] += 1
        return counts

    def euler_characteristic(self) -> int:
        undirected = {tuple(sorted(e)) for e in self.edges()}
        used = np.unique(self.faces)
        return int(len(used) - len(undirected) + len(self.faces))

    def is_edge_manifold(self) -> bool:
        undirected: dict[tuple[int, int], int] = defaultdict(int)
        for (a, b), n in self.edges().items():
            undirected[(min(a, b), max(a, b))] += n
        return all(n == 2 for n in undirected.values())

    def is_consistently_oriented(self) -> bool:
        """Each directed edge appears once and its reverse appears once."""
        counts = self.edges()
        return all(n == 1 and counts.get((b, a)) == 1 for (a, b), n in counts.items())

    def volume(self) -> float:
        v = self.vertices[self.faces]
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)


def _polys(geom) -> list[Polygon]:
    if geom.is_empty:
        return []
    if isinstance(geom, Polygon):
        return [geom]
    return [g for g in getattr(geom, "geoms", []) if isinstance(g, Polygon) and not g.is_empty]


def sections(solid: Solid) -> tuple[list[float], list]:
    """Cut depths and the cross-section of every slab between them (top first)."""
    outline = solid.outline
    T = solid.thickness
    cuts = []
    for f in solid.features:
        for shape, depth in f.cuts(T):
            clipped = shapely.intersection(shape, outline, grid_size=GRID)
            if not clipped.is_empty and clipped.area > 0:
                cuts.append((clipped, min(depth, T)))
    levels = sorted({0.0, T} | {d for _, d in cuts if 0.0 < d < T})
    out = []
    for j in range(1, len(levels)):
        removed = [s for s, d in cuts if d >= levels[j] - 1e-12]
        sec = shapely.set_precision(outline, GRID)
        if removed:
            sec = shapely.difference(sec, shapely.union_all(removed, grid_size=GRID), grid_size=GRID)
        out.append(shapely.orient_polygons(sec))
    return levels, out


def _rings(poly: Polygon) -> list[list[tuple[float, float]]]:
    rings = [list(poly.exterior.coords)[:-1]]
    rings += [list(r.coords)[:-1] for r in poly.interiors]
    return rings


def mesh_solid(solid: Solid) -> Mesh:
    levels, secs = sections(solid)
    if not secs or secs[-1].is_empty:
        raise MeshError(f"plate {solid.name!r}: solid is empty")
    T = solid.thickness
    z_at = [T - d for d in levels]

    faces_up: list[tuple[Polygon, float]] = [(p, z_at[0]) for p in _polys(secs[0])]
    for j in range(len(secs) - 1):
        floor = shapely.orient_polygons(shapely.difference(secs[j + 1], secs[j], grid_size=GRID))
        faces_up += [(p, z_at[j + 1]) for p in _polys(floor) if p.area > 0]
    faces_down = [(p, z_at[-1]) for p in _polys(secs[-1])]
    walls = [(ring, z_at[j], z_at[j + 1]) for j, sec in enumerate(secs) for p in _polys(sec) for ring in _rings(p)]

    all_rings = [r for p, _ in faces_up + faces_down for r in _rings(p)] + [w[0] for w in walls]
    refine = _refiner(all_rings)

    verts: dict[tuple[float, float, float], int] = {}

    def vid(x: float, y: float, z: float) -> int:
        key = (x, y, z)
        if key not in verts:
            verts[key] = len(verts)
        return verts[key]

    tris: list[tuple[int, int, int]] = []
    for poly, z in faces_up:
        tris += _triangulate(poly, refine, z, vid, up=True)
    for poly, z in faces_down:
        tris += _triangulate(poly, refine, z, vid, up=False)
    for ring, top, bottom in walls:
        r = refine(ring)
        for k in range(len(r)):
            (ax, ay), (bx, by) = r[k], r[(k + 1) % len(r)]
            a0, b0, a1, b1 = vid(ax, ay, bottom), vid(bx, by, bottom), vid(ax, ay, top), vid(bx, by, top)
            tris.append((a0, b0, b1))
            tris.append((a0, b1, a1))

    vertices = np.array(sorted(verts, key=verts.get), dtype=np.float64)
    return Mesh(vertices, np.array(tris, dtype=np.int64).reshape(-1, 3))


def _refiner(rings):
    """Return ``refine(ring)`` inserting every known vertex lying on its edges."""
    points = sorted({p for r in rings for p in r})
    tree = STRtree(shapely.points(np.asarray(points, dtype=np.float64)))
    cache: dict[tuple, list] = {}

    def refine(ring):
        key = tuple(ring)
        if key in cache:
            return cache[key]
        pts = np.asarray(ring, dtype=np.float64)
        edges = shapely.linestrings(np.stack([pts, np.roll(pts, -1, axis=0)], axis=1))
        e_idx, p_idx = tree.query(edges, predicate="dwithin", distance=ON_EDGE)
        extra: dict[int, list] = defaultdict(list)
        for e, p in zip(e_idx.tolist(), p_idx.tolist()):
            extra[e].append(points[p])
        out = []
        for k in range(len(ring)):
            a = ring[k]
            b = ring[(k + 1) % len(ring)]
            out.append(a)
            dx, dy = b[0] - a[0], b[1] - a[1]
            L2 = dx * dx + dy * dy
            mids = []
            for q in extra.get(k, ()):
                if q == a or q == b:
                    continue
                t = ((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / L2
                if 0.0 < t < 1.0:
                    mids.append((t, q))
            out += [q for _, q in sorted(mids)]
        cache[key] = out
        return out

    return refine


def _triangulate(poly: Polygon, refine, z: float, vid, up: bool) -> list[tuple[int, int, int]]:
    rings = _rings(poly)
    shell = refine(rings[0])
    holes = [refine(r) for r in rings[1:]]
    dense = Polygon(shell, holes)
    coords = shapely.get_coordinates(shapely.constrained_delaunay_triangles(dense)).reshape(-1, 4, 2)[:, :3]
    out = []
    for (ax, ay), (bx, by), (cx, cy) in coords.tolist():
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if cross == 0.0:
            continue
        a, b, c = vid(ax, ay, z), vid(bx, by, z), vid(cx, cy, z)
        if (cross > 0) == up:
            out.append((a, b, c))
        else:
            out.append((a, c, b))
    return out


def expected_euler(solid: Solid) -> int:
    """Euler characteristic of the solid's boundary: 2 * chi(bottom section)."""
    _, secs = sections(solid)
    return sum(2 - 2 * len(p.interiors) for p in _polys(secs[-1]))


# -- STL ----------------------------------------------------------------------------


def stl_bytes(mesh: Mesh, header: bytes = HEADER) -> bytes:
    buf = io.BytesIO()
    buf.write(header[:80].ljust(80, b"\0"))
    buf.write(struct.pack("<I", mesh.triangle_count))
    v = mesh.vertices[mesh.faces]
    n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    lengths = np.linalg.norm(n, axis=1)
    lengths[lengths == 0] = 1.0
    n = n / lengths[:, None]
    rec = np.zeros(len(v), dtype=[("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    rec["n"] = n
    rec["v"] = v
    buf.write(rec.tobytes())
    return buf.getvalue()


def write_stl(mesh: Mesh, path: str | Path, header: bytes = HEADER) -> Path:
    path = Path(path)
    path.write_bytes(stl_bytes(mesh, header))
    return path


def read_stl_mesh(data: bytes) -> Mesh:
    """Parse binary STL bytes, merging identical float32 vertices."""
    if len(data) < 84:
        raise MeshError("STL payload shorter than its header")
    (n,) = struct.unpack_from("<I", data, 80)
    if len(data) != 84 + 50 * n:
        raise MeshError(f"STL size {len(data)} does not match {n} triangles")
    rec = np.frombuffer(data, dtype=[("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")], count=n, offset=84)
    flat = rec["v"].reshape(-1, 3)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    return Mesh(uniq.astype(np.float64), inverse.reshape(-1, 3).astype(np.int64))
