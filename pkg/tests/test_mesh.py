import math

import pytest

from beamplan.baseplate import Baseplate, Solid, SolidFeature, build_solid
from beamplan.components import GAP, parse_catalog_text
from beamplan.errors import MeshError
from beamplan.exporters import export_stl
from beamplan.geometry import INCH, Point2
from beamplan.mesh import expected_euler, mesh_solid, read_stl_mesh, stl_bytes

from conftest import sas_scene


def check_closed(mesh, genus):
    assert mesh.is_edge_manifold()
    assert mesh.is_consistently_oriented()
    assert mesh.euler_characteristic() == 2 - 2 * genus
    assert mesh.volume() > 0


def test_empty_plate():
    solid = build_solid(Baseplate(50, 40, 10), grid=False)
    mesh = mesh_solid(solid)
    assert mesh.triangle_count >= 12
    check_closed(mesh, 0)
    g = GAP
    assert mesh.volume() == pytest.approx((50 - 2 * g) * (40 - 2 * g) * 10)


def test_one_through_hole():
    cat = parse_catalog_text("""
[component.post]
footprint = { shape = "rect", width = 6, depth = 6, height = 6 }
behavior = "inert"
drill = [{ type = "hole", diameter = 2.2, x = 0, y = 0 }]
""")
    plate = Baseplate(40, 40, 10)
    b = plate.add_beam_path(0, 20, 0)
    plate.place_element_along_beam("p", cat.spec("post"), b, distance=20)
    solid = build_solid(plate, grid=False)
    assert solid.through_holes() == 1
    mesh = mesh_solid(solid)
    check_closed(mesh, 1)
    assert expected_euler(solid) == 0
    block = (40 - 2 * GAP) ** 2 * 10
    cyl = math.pi * 1.1**2 * 10
    # polygonal hole: between the inscribed and circumscribed cylinders
    assert block - cyl / math.cos(math.pi / 64) ** 2 < mesh.volume() < block - cyl * 0.99


def test_counterbore_and_blind_pocket():
    feats = (
        SolidFeature("hole", "a", None, Point2(10, 10), 3.0, counterbore=(6.0, 3.0)),
        SolidFeature("pocket", "b", 4.0, ring=((20, 20), (30, 20), (30, 30), (20, 30), (20, 20))),
    )
    solid = Solid("s", (0, 0, 40, 40), 10.0, feats)
    mesh = mesh_solid(solid)
    check_closed(mesh, 1)
    assert mesh.euler_characteristic() == expected_euler(solid)


def test_sas_plate():
    solid = sas_scene("half_inch_mounted").solid("sas")
    mesh = mesh_solid(solid)
    assert mesh.is_edge_manifold()
    assert mesh.is_consistently_oriented()
    assert mesh.euler_characteristic() == expected_euler(solid)
    assert expected_euler(solid) == 2 - 2 * solid.through_holes()


def test_stl_round_trip():
    mesh = mesh_solid(build_solid(Baseplate(3 * INCH, 2 * INCH, 12.7)))
    data = stl_bytes(mesh)
    assert len(data) == 84 + 50 * mesh.triangle_count
    back = read_stl_mesh(data)
    assert back.triangle_count == mesh.triangle_count
    assert back.is_edge_manifold() and back.is_consistently_oriented()
    assert back.euler_characteristic() == mesh.euler_characteristic()
    assert back.volume() == pytest.approx(mesh.volume(), rel=1e-6)


def test_truncated_stl():
    with pytest.raises(MeshError):
        read_stl_mesh(b"\0" * 40)
    with pytest.raises(MeshError):
        read_stl_mesh(b"\0" * 80 + (5).to_bytes(4, "little"))


def test_exported_sas_is_deterministic(tmp_path):
    scene = sas_scene("mini_optics")
    a = export_stl(scene, tmp_path / "a.stl", plate="sas")
    b = export_stl(scene, tmp_path / "b.stl", plate="sas")
    assert a.read_bytes() == b.read_bytes()
    mesh = read_stl_mesh(a.read_bytes())
    assert mesh.is_edge_manifold() and mesh.is_consistently_oriented()
