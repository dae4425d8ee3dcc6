import math

import pytest

from beamplan.errors import ParseError
from beamplan.exporters import dumps_scene
from beamplan.geometry import INCH, Point2, Pose
from beamplan.layout import (
    compile_path,
    compile_text,
    format_document,
    generate_grid,
    parse_document,
)

from conftest import sas_doc

CELL = """\
table 20 10
template cell
  param f=100
  plate dx=2in dy=1.5in
  beam input x=0 y=0.75in angle=right
  element "lens" role=lens set.f=f beam=input beam_index=0b1 distance=1in angle=right
end
"""


def codes(scene):
    return sorted((d.severity, d.code) for d in scene.diagnostics)


# -- parsing --------------------------------------------------------------------------------


def test_minimal_document():
    doc = parse_document(CELL + "plate cell at (1, 1, 0) with half_inch_mounted name=a\n")
    assert doc.table == (20.0, 10.0)
    assert list(doc.templates) == ["cell"]
    (inst,) = doc.instances
    assert (inst.name, inst.x, inst.y, inst.angle, inst.optic_type) == ("a", 1.0, 1.0, 0.0, "half_inch_mounted")


@pytest.mark.parametrize("text", ["", "# only a comment\n"])
def test_document_needs_a_table(text):
    with pytest.raises(ParseError):
        parse_document(text)


def test_unknown_key_reports_line():
    bad = CELL.replace("beam_index=", "bean_index=")
    with pytest.raises(ParseError) as info:
        parse_document(bad)
    assert info.value.line == 6
    assert "bean_index" in str(info.value)


def test_plate_angle_must_be_quarter_turn():
    with pytest.raises(ParseError, match="multiple of 90"):
        parse_document(CELL + "plate cell at (1, 1, 45) with half_inch_mounted\n")


def test_unterminated_template():
    with pytest.raises(ParseError):
        parse_document(CELL.replace("end\n", ""))


def test_duplicate_instance_name():
    with pytest.raises(ParseError):
        parse_document(CELL + "plate cell at (1, 1, 0) with half_inch_mounted name=a\n"
                              "plate cell at (5, 1, 0) with half_inch_mounted name=a\n")


def test_grid_identity():
    (one,) = generate_grid("cell", 1, 1, 2.0, (3, 4, 90), "mini_optics", name="g")
    assert (one.template, one.x, one.y, one.angle, one.name) == ("cell", 3, 4, 90, "g_r0_c0")


def test_grid_6x6():
    insts = generate_grid("cell", 6, 6, 3.5, (1, 1, 0), "half_inch_mounted", name="arr")
    assert len(insts) == 36
    assert len({i.name for i in insts}) == 36
    last = insts[-1]
    assert (last.x, last.y) == (1 + 5 * 3.5, 1 + 5 * 3.5)


@pytest.mark.parametrize("args", [(0, 3, 1.0), (2, 2, 0.0)])
def test_grid_rejects_bad_shape(args):
    with pytest.raises(ValueError):
        generate_grid("cell", *args, (0, 0, 0), "mini_optics")


def test_grid_statement():
    doc = parse_document(CELL + "grid cell rows=2 cols=3 pitch=2 at (1, 1, 0) with half_inch_mounted name=g\n")
    assert [i.name for i in doc.instances] == [f"g_r{i}_c{j}" for i in range(2) for j in range(3)]


# -- formatter ----------------------------------------------------------------------------------


def test_formatter_idempotent_and_keeps_comments():
    messy = (
        "# header comment\n"
        "table   20 10\n"
        "template cell   # trailing\n"
        "param f=100\n"
        "  plate dy=1.5in  dx=2in\n"
        "beam input angle=right x=0 y=0.75in\n"
        "element \"lens\" distance=1in beam_index=0b1 beam=input role=lens set.f=f angle=right\n"
        "end\n"
        "plate cell at (1,1,0) with half_inch_mounted name=a\n"
    )
    once = format_document(messy)
    assert format_document(once) == once
    assert "# header comment" in once and "# trailing" in once
    a = compile_text(messy)
    b = compile_text(once)
    assert dumps_scene(a).replace(a.provenance["document"], "") == dumps_scene(b).replace(b.provenance["document"], "")


# -- compilation ------------------------------------------------------------------------------------


def test_unknown_optic_type_is_reference_error():
    scene = compile_text(CELL + "plate cell at (1, 1, 0) with two_inch name=a\n")
    assert ("error", "layout.reference") in codes(scene)
    assert not scene.ok


def test_unknown_template_is_reference_error():
    scene = compile_text(CELL + "plate nothing at (1, 1, 0) with half_inch_mounted\n")
    assert [(d.code, d.subject) for d in scene.diagnostics] == [("layout.reference", "nothing")]


def test_recompile_is_byte_identical():
    text = sas_doc("one_inch_mounted")
    assert dumps_scene(compile_text(text)) == dumps_scene(compile_text(text))


def test_frame_consistency():
    scene = compile_text(sas_doc("half_inch_mounted", x=30, y=2, angle=90))
    plate = scene.plate("sas")
    pose = Pose(plate.x * INCH, plate.y * INCH, math.radians(plate.angle))
    for e in scene.elements:
        x, y, a = e.plate_pose
        p = pose.apply(Point2(x, y))
        assert (p.x, p.y) == pytest.approx(e.table_pose[:2], abs=1e-9)
        assert math.remainder(e.table_pose[2] - (a + pose.angle), 2 * math.pi) == pytest.approx(0, abs=1e-12)


def test_substitution_neutrality():
    direct = CELL + "plate cell at (1, 1, 0) with half_inch_mounted name=a\n"
    via_param = direct.replace("param f=100", "param f=100\n  param d=1in").replace("distance=1in", "distance=d")
    via_override = CELL.replace("param f=100", "param f=50") + "plate cell at (1, 1, 0) with half_inch_mounted name=a f=100\n"
    ref = compile_text(direct)
    for other in (via_param, via_override):
        s = compile_text(other)
        assert s.elements == ref.elements
        assert s.segments == ref.segments


def test_use_resolves_bundled_templates(tmp_path):
    doc = tmp_path / "doc.optl"
    doc.write_text(sas_doc("half_inch_mounted"))
    scene = compile_path(doc)
    assert scene.ok and len(scene.elements) == 15


def test_local_template_shadows_bundled(tmp_path):
    (tmp_path / "cells.optl").write_text(CELL.replace("table 20 10\n", "").replace("template cell", "template lens_cell"))
    doc = tmp_path / "doc.optl"
    doc.write_text('table 20 10\nuse "cells.optl"\nplate lens_cell at (1, 1, 0) with half_inch_mounted\n')
    scene = compile_path(doc)
    assert [e.name for e in scene.elements] == ["lens"]


def test_missing_use_is_parse_error(tmp_path):
    with pytest.raises(ParseError):
        compile_text('table 10 10\nuse "nope.optl"\n', path=tmp_path / "x.optl")


def test_plate_overlap():
    scene = compile_text(CELL + "plate cell at (1, 1, 0) with half_inch_mounted name=a\n"
                                "plate cell at (2, 1.5, 0) with half_inch_mounted name=b\n")
    assert [(d.code, d.subject) for d in scene.diagnostics if d.is_error] == [("collide.plate", "a|b")]


def test_plate_bounds():
    scene = compile_text(CELL + "plate cell at (19, 1, 0) with half_inch_mounted name=a\n")
    assert [(d.code, d.subject) for d in scene.diagnostics] == [("layout.bounds", "a")]


def test_rotated_plate_stays_on_table():
    scene = compile_text(CELL + "plate cell at (3, 1, 90) with half_inch_mounted name=a\n")
    assert scene.ok and scene.diagnostics == ()


def test_handoff():
    aligned = CELL + ("plate cell at (1, 1, 0) with half_inch_mounted name=a\n"
                      "plate cell at (4, 1, 0) with half_inch_mounted name=b\n")
    assert compile_text(aligned).diagnostics == ()
    shifted = aligned.replace("(4, 1, 0)", "(4, 1.5, 0)")
    diags = compile_text(shifted).diagnostics
    assert [(d.code, d.subject) for d in diags] == [("rule.handoff", "a/input:0b1")]


def test_littrow_and_fold_functions():
    scene = compile_text('table 30 20\nuse "ecdl.optl"\nplate ecdl at (1, 1, 0) with half_inch_mounted name=e\n')
    assert scene.ok
    grating = scene.element("grating")
    assert "littrow_grating_mount" in grating.component
    assert [d.code for d in scene.diagnostics] == ["rule.grid"]
