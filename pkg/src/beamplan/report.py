"""Review report: matplotlib plan views plus CSV summaries."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Polygon as MplPolygon  # noqa: E402

from . import beam as bm  # noqa: E402
from .exporters import BEAM_COLORS, _plate_corners, _write, plate_filenames, render_bom  # noqa: E402
from .geometry import INCH  # noqa: E402
from .layout import Scene  # noqa: E402

PNG_META = {"Software": None}


def _draw(ax, scene: Scene, plates: set[str]) -> None:
    for p in scene.plates:
        if p.name in plates:
            ax.add_patch(MplPolygon(_plate_corners(p), closed=True, facecolor="#eef2f7", edgecolor="#445", lw=0.8))
    for e in scene.elements:
        if e.plate not in plates:
            continue
        for part in e.parts:
            ax.add_patch(MplPolygon(part.corners, closed=True, facecolor="#cfd8e3", edgecolor="#223", lw=0.4))
    for s in scene.segments:
        if s.plate not in plates or s.ray_end is None:
            continue
        depth = bm.index_depth(s.index)
        (x0, y0), (x1, y1) = s.ray_start, s.ray_end
        ax.plot([x0, x1], [y0, y1], color=BEAM_COLORS[depth % len(BEAM_COLORS)], lw=max(0.4, 1.6 - 0.15 * depth),
                ls="--" if s.end in ("escaped", "stray") else "-")


def plan_figure(scene: Scene, plate: str | None = None):
    names = {plate} if plate else {p.name for p in scene.plates}
    fig, ax = plt.subplots(figsize=(8, 5), dpi=100)
    _draw(ax, scene, names)
    if plate:
        p = scene.plate(plate)
        xs, ys = zip(*_plate_corners(p))
        pad = 5.0
        ax.set_xlim(min(xs) - pad, max(xs) + pad)
        ax.set_ylim(min(ys) - pad, max(ys) + pad)
        ax.set_title(f"{p.name} ({p.template}, {p.optic_type})")
    else:
        W, H = scene.table[0] * INCH, scene.table[1] * INCH
        ax.add_patch(MplPolygon([(0, 0), (W, 0), (W, H), (0, H)], closed=True, fill=False, edgecolor="#888", lw=0.8))
        ax.set_xlim(-10, W + 10)
        ax.set_ylim(-10, H + 10)
        ax.set_title(f"table {scene.table[0]:g} x {scene.table[1]:g} in")
    ax.set_aspect("equal")
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    fig.tight_layout()
    return fig


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def plate_summary_rows(scene: Scene) -> list[tuple]:
    rows = []
    for p in scene.plates:
        segs = scene.segments_on(p.name)
        ends = {}
        for s in segs:
            ends[(s.beam, s.index)] = s.end
        leaves = [k for k in ends if not any(bm.is_descendant(j, k[1]) and j != k[1] for b, j in ends if b == k[0])]
        try:
            solid = scene.solid(p.name)
            holes = len(solid.holes)
        except KeyError:
            holes = ""
        rows.append((
            p.name, p.template, p.optic_type, f"{p.dx:.3f}", f"{p.dy:.3f}", len(scene.elements_on(p.name)),
            len(segs), len(leaves), holes,
        ))
    return rows


def write_report(scene: Scene, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    fig = plan_figure(scene)
    fig.savefig(out / "table.png", metadata=PNG_META)
    plt.close(fig)
    written.append(out / "table.png")
    for name, fname in plate_filenames(scene, "png").items():
        fig = plan_figure(scene, name)
        fig.savefig(out / fname, metadata=PNG_META)
        plt.close(fig)
        written.append(out / fname)
    written.append(_write(out / "bom.csv", render_bom(scene)))
    written.append(_write(out / "diagnostics.csv", _csv(
        [(d.severity, d.code, d.subject, d.message) for d in scene.diagnostics],
        ("severity", "code", "subject", "message"),
    )))
    written.append(_write(out / "plates.csv", _csv(
        plate_summary_rows(scene),
        ("plate", "template", "optic_type", "dx_mm", "dy_mm", "elements", "segments", "leaves", "holes"),
    )))
    return written
