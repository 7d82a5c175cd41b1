import pytest

from brinkman.mesh import generate_channel_mesh

ACCEPTANCE: dict[str, tuple[bool, str]] = {}

SINGLE_TRIANGLE_MSH = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
3
1 0 0 0
2 1 0 0
3 0 1 0
$EndNodes
$Elements
4
1 1 2 1 1 1 2
2 1 2 3 3 2 3
3 1 2 3 3 3 1
4 2 2 100 100 1 2 3
$EndElements
"""


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


@pytest.fixture(scope="session")
def unit_grid():
    return generate_channel_mesh(0, 1, 0, 1, [], 0.5)


@pytest.fixture(scope="session")
def corner_obstacle_grid():
    return generate_channel_mesh(0, 1, 0, 1, [(0.5, 1.0, 0.5, 1.0)], 0.5)


@pytest.fixture(scope="session")
def rect_channel_coarse():
    return generate_channel_mesh(-2, 2, -1, 1, [(-1.1, -0.9, 0.4, 1.0)], 0.1)
