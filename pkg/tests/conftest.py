import math

import numpy as np
import pytest

from scanplan.geometry import MeasurementPoint
from scanplan.scenarios import heightfield
from scanplan.uncertainty import SensorUncertaintyCurve
from scanplan.visibility import Scene, SensorModel, VisibilityModel, Viewpoint

ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture
def record():
    """Record one pass/fail line per acceptance criterion for the summary."""

    def _record(n: int, ok: bool, detail: str):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE[n] = line
        print(line)
        return ok

    return _record


@pytest.fixture
def plate():
    """Flat 100 x 100 plate in z = 0, normals +z."""
    return heightfield(100.0, 100.0, 4, 4)


@pytest.fixture
def curve():
    return SensorUncertaintyCurve.default()


@pytest.fixture
def model(plate, curve):
    return VisibilityModel(SensorModel(), curve, Scene.from_meshes(plate))


def mp(id_, pos, normal=(0.0, 0.0, 1.0), kind="surface", tol=2.0, critical=False):
    return MeasurementPoint(id_, tuple(pos), tuple(normal), kind, tol, critical)


def down(id_, pos, roll=0.0):
    """Viewpoint looking straight down."""
    return Viewpoint(id_, tuple(pos), (0.0, 0.0, -1.0), roll)


def deg(x):
    return math.radians(x)


def rng(seed=0):
    return np.random.default_rng(seed)
