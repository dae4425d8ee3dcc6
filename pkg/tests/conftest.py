import functools
import math

import pytest

from beamplan.components import bundled_catalog
from beamplan.layout import compile_text

SCALES = {
    "mini_optics": 0.25,
    "half_inch_unmounted": 0.5,
    "half_inch_mounted": 1.0,
    "one_inch_mounted": 1.25,
}


def sas_doc(optic_type: str, x: float = 1, y: float = 1, angle: float = 0) -> str:
    return (
        "table 60 40\n"
        'use "rb_sas.optl"\n'
        f"plate rb_sas at ({x}, {y}, {angle}) with {optic_type} name=sas\n"
    )


@functools.lru_cache(maxsize=None)
def sas_scene(optic_type: str):
    return compile_text(sas_doc(optic_type))


@pytest.fixture(scope="session")
def catalog():
    return bundled_catalog()


def angle_close(a: float, b: float, tol: float = 1e-12) -> bool:
    return abs(math.remainder(a - b, 2 * math.pi)) <= tol


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
