import pytest

from uavroute.radio import NodeKind, NodeState
from uavroute.roadmap import build_grid_map


@pytest.fixture(scope="session")
def city():
    return build_grid_map(3, 3, 2000.0, 300.0)


def vehicle(rm, node_id, segment, offset):
    x, y = rm.point_on(segment, offset)
    return NodeState(node_id, NodeKind.VEHICLE, (x, y, 0.0), segment, rm.zone_for(segment, offset))


def uav(node_id, x, y, z=100.0):
    return NodeState(node_id, NodeKind.UAV, (x, y, z))


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[criterion] = (ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
