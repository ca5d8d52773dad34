import numpy as np
import pytest

from cuspkit.atlas import build_atlas
from cuspkit.parallel import Model3RPR
from cuspkit.serial3r import Geometry3R


@pytest.fixture(scope="session")
def example():
    """Orthogonal 3R arm with four cusps."""
    return Geometry3R(1.0, 2.0, 1.5, 1.0, 0.0)


@pytest.fixture(scope="session")
def noncuspidal():
    return Geometry3R(1.0, 0.5, 2.0, 1.0, 0.0)


@pytest.fixture(scope="session")
def example_atlas(example):
    return build_atlas(example, 256)


@pytest.fixture(scope="session")
def rpr3():
    return Model3RPR.reference()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "").rpartition("::")[2]
            if name.startswith("test_criterion_") and rep.when == "call":
                n = int(name.split("_")[2])
                lines.append((n, "PASS" if outcome == "passed" else "FAIL", name[len("test_criterion_00_"):]))
    if lines:
        terminalreporter.section("acceptance criteria")
        for n, verdict, title in sorted(lines):
            terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {title.replace('_', ' ')}")
