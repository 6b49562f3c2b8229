import functools

import pytest
from hypothesis import HealthCheck, settings

from su2sps.fusion import FusionMaps
from su2sps.sps_core import build_system

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# one line per acceptance criterion, printed after the run so capture does not hide them
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])


@functools.lru_cache(maxsize=None)
def system(n: int, M: int):
    return build_system(n, M)


@functools.lru_cache(maxsize=None)
def fusion_maps(n: int, M: int):
    return FusionMaps(system(n, M))


@pytest.fixture(scope="session")
def get_system():
    return system


@pytest.fixture(scope="session")
def get_fusion():
    return fusion_maps
