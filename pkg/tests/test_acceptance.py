"""Acceptance checks, one per criterion.

Each check prints a single PASS/FAIL line; the lines are also repeated in
the pytest terminal summary.  Run directly with ``python3 tests/test_acceptance.py``.
"""

import csv
import io
import math
import random
import sys
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from beamplan import beam as bm  # noqa: E402
from beamplan.baseplate import Baseplate, build_solid, detect_collisions  # noqa: E402
from beamplan.cli import EXAMPLES_DIR, main  # noqa: E402
from beamplan.components import bundled_catalog, littrow_angle, parse_catalog_text  # noqa: E402
from beamplan.exporters import export_stl, render_bom  # noqa: E402
from beamplan.geometry import Point2  # noqa: E402
from beamplan.layout import compile_path, compile_text  # noqa: E402
from beamplan.mesh import expected_euler, read_stl_mesh  # noqa: E402

from conftest import SCALES, sas_doc  # noqa: E402

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# -- 1 --------------------------------------------------------------------------------


def test_criterion_1_sas_golden():
    start = time.perf_counter()
    scenes = {ot: compile_text(sas_doc(ot)) for ot in SCALES}
    elapsed = time.perf_counter() - start
    problems = []
    for ot, scene in scenes.items():
        if len(scene.elements) != 15:
            problems.append(f"{ot}: {len(scene.elements)} elements")
        bad = [d.code for d in scene.diagnostics if d.is_error or d.code.startswith("rule.")]
        if bad:
            problems.append(f"{ot}: {bad}")
        if scene.element("Photodiode").index != 0b1110:
            problems.append(f"{ot}: photodiode index")
    report(1, not problems and elapsed < 1.0,
           f"4 scales x 15 elements, 0 errors, 0 rule warnings, photodiode 0b1110, {elapsed:.3f} s {problems or ''}")


# -- 2 --------------------------------------------------------------------------------


def test_criterion_2_scale_covariance():
    def positions(ot):
        scene = compile_text(sas_doc(ot))
        entry = next(s for s in scene.segments if s.index == 1).origin
        return {
            e.name: (e.table_pose[0] - entry[0], e.table_pose[1] - entry[1])
            for e in scene.elements if e.constraint[0] == "distance"
        }

    a, b = positions("mini_optics"), positions("one_inch_mounted")
    # the photodiode is distance-placed only at the mounted scales
    names = sorted(a.keys() & b.keys())
    worst = max(
        max(abs(a[n][0] / 0.25 - b[n][0] / 1.25), abs(a[n][1] / 0.25 - b[n][1] / 1.25)) for n in names
    )
    report(2, len(names) == 14 and worst <= 1e-9,
           f"{len(names)} elements distance-placed at both scales, max |p(0.25)/0.25 - p(1.25)/1.25| = {worst:.2e} mm")


# -- 3 --------------------------------------------------------------------------------


def _random_splitter_tree(rng):
    elements, open_idx = [], [1]
    for k in range(rng.randint(1, 14)):
        i = open_idx.pop(rng.randrange(len(open_idx)))
        normal = (2 * rng.randrange(4) + 1) * math.pi / 4
        elements.append(bm.TraceElement(f"s{k}", bm.Splitter(), normal, 5.0, "s", i, bm.Distance(rng.uniform(20, 120))))
        open_idx.extend(bm.child_indices(i))
    source = bm.BeamSource("s", Point2(1000.0, 1000.0), 0.0)
    return bm.trace([source], elements, (0, 0, 2000, 2000)).trees["s"]


def test_criterion_3_index_law():
    rng = random.Random(3)
    failures = 0
    for _ in range(1000):
        tree = _random_splitter_tree(rng)
        idx = tree.indices()
        ok = len(idx) == len(set(idx))
        for i in idx:
            ok &= bm.child_indices(i) == (2 * i, 2 * i + 1)
            if i != 1:
                p = bm.parent_index(i)
                ok &= p in idx and bin(i).startswith(bin(p)) and tree.last(p).end == "split"
                ok &= i in bm.child_indices(p)
        failures += not ok
    report(3, failures == 0, f"1000 traced splitter trees, {failures} violations of uniqueness/prefix/child law")


# -- 4 --------------------------------------------------------------------------------


def test_criterion_4_double_pass():
    shift = bundled_catalog().spec("aom").behavior.shift
    start = time.perf_counter()
    worst_angle = worst_offset = 0.0
    freq_ok = True
    sweep = [round(-5 + 0.5 * k, 1) for k in range(21)]
    for deg in sweep:
        scene = compile_text(
            'table 40 20\nuse "doublepass.optl"\n'
            f"plate doublepass at (1, 1, 0) with half_inch_mounted name=dp deflection={deg}\n"
        )
        if not scene.ok:
            freq_ok = False
            continue
        inp = next(s for s in scene.segments if s.index == 1)
        ret = [s for s in scene.segments if s.index == 0b10][-1]
        out = next(s for s in scene.segments if s.index == 0b101)
        d = math.remainder(ret.ray_heading - inp.ray_heading - math.pi, 2 * math.pi)
        u = (math.cos(inp.ray_heading), math.sin(inp.ray_heading))
        off = (ret.ray_start[0] - inp.ray_start[0]) * -u[1] + (ret.ray_start[1] - inp.ray_start[1]) * u[0]
        worst_angle = max(worst_angle, abs(d))
        worst_offset = max(worst_offset, abs(off))
        freq_ok &= out.frequency_offset == 2 * shift
    elapsed = time.perf_counter() - start
    report(4, worst_angle <= 1e-12 and worst_offset <= 1e-9 and freq_ok and elapsed < 1.0,
           f"{len(sweep)} deflections in [-5, 5] deg: angle err {worst_angle:.1e} rad, "
           f"offset {worst_offset:.1e} mm, output shift 2x{shift:g} MHz exact={freq_ok}, {elapsed:.3f} s")


# -- 5 --------------------------------------------------------------------------------


def test_criterion_5_littrow():
    mpmath.mp.dps = 50
    oracle = float(mpmath.asin(mpmath.mpf("421.6") * 3600 / 2_000_000))
    err = abs(littrow_angle(421.6, 3600, 1) - oracle)
    rng = random.Random(5)
    worst = 0.0
    done = 0
    while done < 100:
        wl, n, m = rng.uniform(200, 1600), rng.uniform(300, 3600), rng.randint(1, 3)
        if m * wl * n * 1e-6 / 2 > 1:
            continue
        theta = littrow_angle(wl, n, m)
        worst = max(worst, abs(2 * (1e6 / n) * math.sin(theta) - m * wl) / (m * wl))
        done += 1
    report(5, err <= 1e-12 and worst <= 8 * sys.float_info.epsilon,
           f"421.6 nm / 3600 l/mm vs 50-digit arcsin: {err:.1e} rad; worst relative residual {worst:.1e} over 100 inputs")


# -- 6 --------------------------------------------------------------------------------


def test_criterion_6_collision_oracle():
    from test_baseplate import _as_set, _oracle, random_plate

    rng = random.Random(6)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        plate = random_plate(rng)
        mismatches += _as_set(detect_collisions(plate)) != _oracle(plate)
    elapsed = time.perf_counter() - start
    report(6, mismatches == 0 and elapsed < 30, f"1000 random scenes (<= 20 elements), {mismatches} mismatches, {elapsed:.2f} s")


# -- 7 --------------------------------------------------------------------------------


def test_criterion_7_mesh_validity(tmp_path):
    parts = parse_catalog_text("""
[component.post]
footprint = { shape = "rect", width = 6, depth = 6, height = 6 }
behavior = "inert"
drill = [{ type = "hole", diameter = 2.2, x = 0, y = 0 }]
""")
    empty = build_solid(Baseplate(6 * 25.4, 6 * 25.4, 12.7), grid=False)
    plate = Baseplate(40, 40, 10)
    b = plate.add_beam_path(0, 20, 0)
    plate.place_element_along_beam("p", parts.spec("post"), b, distance=20)
    one = build_solid(plate, grid=False)
    sas = compile_text(sas_doc("half_inch_mounted")).solid("sas")
    lines = []
    ok = True
    for name, solid, genus in (("empty", empty, 0), ("1-hole", one, 1), ("SAS", sas, sas.through_holes())):
        mesh = read_stl_mesh(export_stl(solid, tmp_path / f"{name}.stl").read_bytes())
        chi = mesh.euler_characteristic()
        good = mesh.is_edge_manifold() and mesh.is_consistently_oriented() and chi == 2 - 2 * genus == expected_euler(solid)
        ok &= good
        lines.append(f"{name} chi={chi} genus={genus}")
    report(7, ok, "manifold, oriented, Euler-consistent: " + "; ".join(lines))


# -- 8 --------------------------------------------------------------------------------


def test_criterion_8_determinism(tmp_path):
    doc = str(EXAMPLES_DIR / "laser_cooling.optl")
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        codes = [main(["compile", doc, "--out", str(out / "scene.json")])]
        for fmt in ("stl", "svg", "bom", "drill", "scene"):
            codes.append(main(["export", doc, "--format", fmt, "--out", str(out / fmt)]))
        codes.append(main(["report", doc, "--out", str(out / "report")]))
        files = {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
        runs.append((codes, files))
    (c0, f0), (c1, f1) = runs
    same = f0 == f1
    report(8, same and c0 == c1 == [0] * 7 and len(f0) > 20,
           f"laser-cooling document, {len(f0)} artifacts, byte-identical={same}")


# -- 9 --------------------------------------------------------------------------------


def test_criterion_9_scalability():
    start = time.perf_counter()
    scene = compile_path(EXAMPLES_DIR / "grid_demo.optl")
    elapsed = time.perf_counter() - start
    rows = {r["component_id"]: int(r["quantity"]) for r in csv.DictReader(io.StringIO(render_bom(scene)))}
    mirror_cells = rows.get("circular_mirror", 0)
    lens_cells = rows.get("lens", 0)
    errors = [d for d in scene.diagnostics if d.is_error]
    report(9, not errors and elapsed < 5.0 and mirror_cells == 36 and lens_cells == 50,
           f"6x6 array + 50-element row: {len(scene.plates)} plates, mirrors={mirror_cells}, lenses={lens_cells}, "
           f"{len(errors)} errors, {elapsed:.2f} s")


# -- 10 -------------------------------------------------------------------------------


def test_criterion_10_thin_lens():
    f = 100.0
    worst = worst_oracle = 0.0
    rays = np.linspace(-5.0, 5.0, 11)
    for y in rays:
        seg = bm.BeamSegment(1, Point2(0.0, 0.0), 0.0, ray_state=(float(y), 0.0))
        (out,) = bm.interact(bm.ThinLens(f), seg, (Point2(20.0, 0.0), 0.0))
        y1, s1 = out.ray_state
        # ray height 100 mm after the lens
        at_focus = y1 + s1 * f
        worst = max(worst, abs(at_focus))
        # ABCD: thin lens followed by 100 mm of free space
        m = np.array([[1.0, f], [0.0, 1.0]]) @ np.array([[1.0, 0.0], [-1.0 / f, 1.0]])
        y_oracle, s_oracle = m @ np.array([float(y), 0.0])
        worst_oracle = max(worst_oracle, abs(at_focus - y_oracle), abs(s1 - s_oracle))
    report(10, worst <= 1e-9 and worst_oracle <= 1e-9,
           f"11 rays |y| <= 5 mm through f=100 mm: max height at focus {worst:.1e} mm, ABCD disagreement {worst_oracle:.1e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
