import math
import random
import struct

import mpmath
import pytest

from beamplan import beam as bm
from beamplan.components import (
    Catalog,
    Rect,
    generate_grating_mount,
    littrow_angle,
    load_catalog,
    parse_catalog_text,
    register_mesh_component,
    resolve_role,
)
from beamplan.errors import CatalogError, LittrowError, MeshError

ONE = """
[component.flat]
params = { w = 10 }
footprint = { shape = "rect", width = "w", depth = 2, height = 5 }
behavior = "mirror"
align = "normal"
"""

OTHER = """
[component.post]
footprint = { shape = "disc", diameter = 12.7, thickness = 20 }
behavior = "inert"
"""


def mpmath_littrow(wl, n, order=1):
    mpmath.mp.dps = 50
    s = mpmath.mpf(order) * mpmath.mpf(wl) * mpmath.mpf(n) / mpmath.mpf(2_000_000)
    return float(mpmath.asin(s))


# -- catalog loading ----------------------------------------------------------


def test_empty_file_list_gives_empty_catalog():
    assert len(load_catalog([])) == 0


def test_single_component(tmp_path):
    p = tmp_path / "a.toml"
    p.write_text(ONE)
    cat = load_catalog([p])
    assert len(cat) == 1
    spec = cat.spec("flat")
    assert spec.footprint == Rect(width=10, depth=2, height=5)
    assert isinstance(spec.behavior, bm.Mirror)


def test_overrides_rebuild_geometry():
    cat = parse_catalog_text(ONE)
    assert cat.spec("flat", {"w": 4}).footprint.width == 4
    assert cat.spec("flat").footprint.width == 10


def test_duplicate_id_across_files(tmp_path):
    a, b = tmp_path / "a.toml", tmp_path / "b.toml"
    a.write_text(ONE)
    b.write_text(ONE)
    with pytest.raises(CatalogError, match="duplicate"):
        load_catalog([a, b])


def test_dangling_mount_chain():
    text = ONE + 'mount_chain = ["nonexistent"]\n'
    with pytest.raises(CatalogError, match="nonexistent"):
        parse_catalog_text(text)


def test_load_order_independent(tmp_path):
    a, b = tmp_path / "a.toml", tmp_path / "b.toml"
    a.write_text(ONE)
    b.write_text(OTHER)
    c1, c2 = load_catalog([a, b]), load_catalog([b, a])
    assert c1.ids() == c2.ids() == ["flat", "post"]
    assert c1.digest() == c2.digest()
    assert c1.spec("post") == c2.spec("post")


def test_unreadable_catalog(tmp_path):
    with pytest.raises(CatalogError):
        load_catalog([tmp_path / "missing.toml"])


def test_malformed_toml():
    with pytest.raises(CatalogError):
        parse_catalog_text("[component.x\nfootprint = 1")


def test_bundled_catalog_resolves_everything(catalog):
    assert "mirror_mount_km05" in catalog
    for cid in catalog.ids():
        catalog.spec(cid)
    for tid in catalog.optic_type_ids():
        t = catalog.optic_type(tid)
        for role in t.roles:
            resolve_role(t, role, catalog)


# -- Littrow --------------------------------------------------------------------


def test_littrow_matches_high_precision_oracle():
    assert abs(littrow_angle(421.6, 3600, 1) - mpmath_littrow(421.6, 3600)) <= 1e-12


def test_littrow_780_1800():
    assert math.degrees(littrow_angle(780, 1800)) == pytest.approx(44.5877, abs=5e-5)


def test_littrow_no_solution():
    with pytest.raises(LittrowError):
        littrow_angle(600, 3600)


def test_littrow_zero_wavelength():
    assert littrow_angle(0, 1200) == 0.0


@pytest.mark.parametrize("args", [(-1, 1200, 1), (780, 0, 1), (780, 1200, 0)])
def test_littrow_rejects_bad_input(args):
    with pytest.raises(ValueError):
        littrow_angle(*args)


def test_littrow_grating_equation_residual():
    rng = random.Random(7)
    checked = 0
    while checked < 100:
        wl = rng.uniform(200, 1600)
        n = rng.uniform(300, 3600)
        m = rng.randint(1, 3)
        if m * wl * 1e-6 * n / 2 > 1:
            continue
        theta = littrow_angle(wl, n, m)
        d = 1e6 / n  # groove spacing in nm
        residual = 2 * d * math.sin(theta) - m * wl
        assert abs(residual) <= 8 * math.ulp(m * wl)
        assert abs(theta - mpmath_littrow(wl, n, m)) <= 1e-12
        checked += 1


def test_grating_mount_geometry():
    g = generate_grating_mount(780, 1800)
    assert len(g.holes) == 2
    assert all(h.countersink for h in g.holes)
    assert g.angle == littrow_angle(780, 1800)
    spec = g.to_spec()
    assert isinstance(spec.behavior, bm.Grating)
    assert spec.params["littrow_angle"] == g.angle


# -- optic-type tables -------------------------------------------------------------


def test_mounted_mirror_has_km05(catalog):
    spec = resolve_role(catalog.optic_type("half_inch_mounted"), "mirror", catalog)
    assert spec.base_id == "circular_mirror"
    assert spec.mount_chain == ("mirror_mount_km05",)


def test_mini_mirror(catalog):
    spec = resolve_role(catalog.optic_type("mini_optics"), "mirror", catalog)
    assert spec.base_id == "square_mirror"
    assert spec.footprint == Rect(width=3, depth=2, height=4)
    assert spec.mount_chain == ()


def test_unknown_role(catalog):
    with pytest.raises(CatalogError):
        resolve_role(catalog.optic_type("half_inch_mounted"), "prism", catalog)


def test_unknown_optic_type(catalog):
    with pytest.raises(CatalogError):
        catalog.optic_type("two_inch")


# -- mesh registration ---------------------------------------------------------------


def _cube_stl(path, size=1.0):
    s = size
    v = [(x, y, z) for x in (0, s) for y in (0, s) for z in (0, s)]
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    tris = [(a, b, c) for q in quads for a, b, c in ((q[0], q[1], q[2]), (q[0], q[2], q[3]))]
    data = bytearray(b"cube".ljust(80, b"\0"))
    data += struct.pack("<I", len(tris))
    for t in tris:
        data += struct.pack("<3f", 0, 0, 0)
        for i in t:
            data += struct.pack("<3f", *v[i])
        data += b"\0\0"
    path.write_bytes(bytes(data))
    return path


def test_register_unit_cube(tmp_path):
    stl = _cube_stl(tmp_path / "cube.stl")
    cat = Catalog()
    spec = register_mesh_component(stl, (0, 0, 0), 0.0, id="cube", catalog=cat)
    assert spec.footprint == Rect(1, 1, 1)
    assert "cube" in cat
    assert spec.optical_center_offset.z == 0


def test_register_rotation_keeps_footprint(tmp_path):
    stl = _cube_stl(tmp_path / "cube.stl", 2.0)
    a = register_mesh_component(stl, (1, 1, 0), 0.0)
    b = register_mesh_component(stl, (1, 1, 0), math.pi / 2)
    assert a.footprint == b.footprint == Rect(2, 2, 2)


def test_register_duplicate_id(tmp_path):
    stl = _cube_stl(tmp_path / "cube.stl")
    cat = Catalog()
    register_mesh_component(stl, (0, 0, 0), 0.0, id="cube", catalog=cat)
    with pytest.raises(CatalogError):
        register_mesh_component(stl, (0, 0, 0), 0.0, id="cube", catalog=cat)


def test_register_empty_mesh(tmp_path):
    p = tmp_path / "empty.stl"
    p.write_bytes(b"\0" * 80 + struct.pack("<I", 0))
    with pytest.raises(MeshError):
        register_mesh_component(p, (0, 0, 0), 0.0)


def test_register_garbage(tmp_path):
    p = tmp_path / "junk.stl"
    p.write_bytes(b"\xff\xfe not an stl")
    with pytest.raises(MeshError):
        register_mesh_component(p, (0, 0, 0), 0.0)
