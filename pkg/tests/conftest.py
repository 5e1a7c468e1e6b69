import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from surfremesh import shapes  # noqa: E402
from surfremesh.surface import SurfacePolyhedron  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def sphere():
    return SurfacePolyhedron(*shapes.icosphere(3))


@pytest.fixture(scope="session")
def coarse_sphere():
    return SurfacePolyhedron(*shapes.icosphere(2))


@pytest.fixture(scope="session")
def torus():
    return SurfacePolyhedron(*shapes.torus())


@pytest.fixture(scope="session")
def rounded_cube():
    return SurfacePolyhedron(*shapes.rounded_cube())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
