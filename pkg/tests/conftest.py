import numpy as np
import pytest

from normalrefine.grid import CameraIntrinsics, DepthGrid


def row_grid(values, rows=5):
    """Depth grid repeating a 1-D row vertically, so only ``u`` varies."""
    z = np.tile(np.asarray(values, dtype=np.float64), (rows, 1))
    return DepthGrid(z)


def ramp_grid(w=8, h=6, a=1.0, b=0.0, c=10.0):
    u, v = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    return DepthGrid(c + a * u + b * v)


@pytest.fixture
def cam():
    return CameraIntrinsics(120.0, 120.0, 79.5, 59.5)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def record(tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
