from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from egcomp.graph import load_graph

DATA = Path(__file__).parent / "data"

settings.register_profile(
    "default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def ied_schema():
    return load_graph(DATA / "ied_schema.json")


@pytest.fixture(scope="session")
def ied_instance():
    return load_graph(DATA / "ied_instance.json")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
