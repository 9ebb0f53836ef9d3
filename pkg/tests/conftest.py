import pytest

from poissoncdo import Contract, ModelParams


@pytest.fixture
def calm():
    """Calm-economy parameters: one event every 20 years, mean jump 0.1."""
    return ModelParams(0.05, 10.0)


@pytest.fixture
def five_years():
    return Contract(5.0, 0.0)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
