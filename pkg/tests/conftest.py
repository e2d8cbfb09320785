import numpy as np
import pytest

from polyfk.mesh import generate_cartesian_mesh, generate_voronoi_mesh

UNIT = (0.0, 1.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def voronoi30():
    return generate_voronoi_mesh(UNIT, 30, 100, 42)


@pytest.fixture(scope="session")
def square():
    return generate_cartesian_mesh(UNIT, 1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """``verdict(n, ok, detail)`` prints one PASS/FAIL line for criterion ``n`` and asserts ``ok``."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def report(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        print(line)
        lines.append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
