import csv
import io
import xml.etree.ElementTree as ET

import pytest

from beamplan.exporters import (
    bom_rows,
    dump_scene,
    dumps_scene,
    export_bom,
    export_drill_drawing,
    export_svg,
    load_scene,
    loads_scene,
    plate_filenames,
    render_bom,
    render_drill_csv,
    render_svg,
    slugify,
)
from beamplan.layout import compile_text

from conftest import sas_scene

SVG = "{http://www.w3.org/2000/svg}"
ECDL = 'table 30 20\nuse "ecdl.optl"\nplate ecdl at (1, 1, 0) with half_inch_mounted name=e\n'


def bom(scene, **kw):
    return {row["component_id"]: row for row in csv.DictReader(io.StringIO(render_bom(scene, **kw)))}


def test_sas_bom_counts():
    rows = bom(sas_scene("half_inch_mounted"))
    assert int(rows["circular_mirror"]["quantity"]) == 7
    assert int(rows["mirror_mount_km05"]["quantity"]) == 7
    assert rows["circular_mirror"]["plate"] == "sas"
    assert sum(int(r["quantity"]) for r in rows.values()) == sum(len(e.parts) for e in sas_scene("half_inch_mounted").elements)


def test_bom_crlf_and_header():
    text = render_bom(sas_scene("mini_optics"))
    assert text.startswith("component_id,description,quantity,plate\r\n")
    assert text.count("\r\n") == text.count("\n")


def test_empty_scene_exports():
    scene = compile_text("table 10 10\n")
    assert render_bom(scene) == "component_id,description,quantity,plate\r\n"
    root = ET.fromstring(render_svg(scene))
    assert root.find(f"{SVG}g[@id='table']/{SVG}rect") is not None
    assert list(root.find(f"{SVG}g[@id='plates']")) == []
    assert list(root.find(f"{SVG}g[@id='elements']")) == []
    assert list(root.find(f"{SVG}g[@id='beams']")) == []


def test_svg_structure():
    scene = sas_scene("half_inch_mounted")
    root = ET.fromstring(render_svg(scene))
    groups = root.find(f"{SVG}g[@id='elements']")
    labels = [g.find(f"{SVG}text").text for g in groups]
    assert len(labels) == 15
    assert set(labels) == {e.name for e in scene.elements}
    beams = root.findall(f"{SVG}g[@id='beams']/{SVG}polyline")
    assert {b.get("data-index") for b in beams} == {f"0b{s.index:b}" for s in scene.segments}
    assert all(b.get("class").startswith("depth-") for b in beams)
    assert list(root.find(f"{SVG}g[@id='collisions']")) == []


def test_collision_highlight():
    text = ('table 20 10\nuse "cells.optl"\n'
            "plate lens_cell at (1, 1, 0) with half_inch_mounted name=a\n"
            "plate lens_cell at (2, 1.5, 0) with half_inch_mounted name=b\n")
    root = ET.fromstring(render_svg(compile_text(text)))
    assert len(list(root.find(f"{SVG}g[@id='collisions']"))) >= 2


def test_single_plate_svg(tmp_path):
    path = export_svg(sas_scene("mini_optics"), tmp_path / "p.svg", plate="sas")
    root = ET.parse(path).getroot()
    assert len(root.findall(f"{SVG}g[@id='plates']/{SVG}polygon")) == 1


def test_drill_table():
    rows = list(csv.DictReader(io.StringIO(render_drill_csv(compile_text(ECDL)))))
    assert any(r["thread"] == "8-32" and r["element"] == "diode" for r in rows)
    assert sum(r["countersink"] == "yes" for r in rows) == 2
    assert [r["feature"] for r in rows] == [f"H{i + 1}" for i in range(len(rows))]


def test_drill_drawing_files(tmp_path):
    svg, table = export_drill_drawing(compile_text(ECDL), tmp_path / "e.drill.svg")
    assert svg.name == "e.drill.svg" and table.name == "e.drill.csv"
    ET.parse(svg)


def test_scene_round_trip(tmp_path):
    scene = sas_scene("one_inch_mounted")
    text = dumps_scene(scene)
    assert '"0b1110"' in text
    assert loads_scene(text) == scene
    path = dump_scene(scene, tmp_path / "s.scene.json")
    assert load_scene(path) == scene
    assert dumps_scene(load_scene(path)) == text


def test_provenance():
    scene = sas_scene("mini_optics")
    assert len(scene.provenance["document"]) == 64
    assert len(scene.provenance["catalog"]) == 64


def test_exports_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        scene = compile_text(ECDL)
        out.mkdir()
        export_svg(scene, out / "t.svg")
        export_bom(scene, out / "t.csv")
        export_drill_drawing(scene, out / "t.drill.svg")
        dump_scene(scene, out / "t.json")
    for f in sorted(p.name for p in a.iterdir()):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_bom_per_plate():
    text = ('table 30 20\nuse "cells.optl"\n'
            "plate lens_cell at (1, 1, 0) with half_inch_mounted name=a\n"
            "plate mirror_cell at (5, 1, 0) with half_inch_mounted name=b\n")
    scene = compile_text(text)
    assert {r[0] for r in bom_rows(scene, plate="a")} == {"lens", "lens_mount_lmr05"}
    assert "lens" not in {r[0] for r in bom_rows(scene, plate="b")}


@pytest.mark.parametrize("name, slug", [("rb_sas", "rb_sas"), ("My Plate #1", "My_Plate_1")])
def test_slugify(name, slug):
    assert slugify(name) == slug


def test_plate_filenames_unique():
    text = ('table 30 20\nuse "cells.optl"\n'
            'plate lens_cell at (1, 1, 0) with half_inch_mounted name="a b"\n'
            'plate lens_cell at (5, 1, 0) with half_inch_mounted name="a-b"\n')
    names = plate_filenames(compile_text(text), "stl")
    assert len(set(names.values())) == 2
