import pytest

from loginaudit.engine import BlastConfig
from loginaudit.http_session import ResponsePage, SessionConfig
from loginaudit.simulator import get_scenario, spawn


@pytest.fixture
def simulator():
    """Factory fixture: ``simulator(name_or_scenario)`` returns a running handle."""
    handles = []

    def start(scenario, **kwargs):
        if isinstance(scenario, str):
            scenario = get_scenario(scenario)
        handle = spawn(scenario, **kwargs)
        handles.append(handle)
        return handle

    yield start
    for handle in handles:
        handle.stop()


def config_for(scenario, **overrides) -> BlastConfig:
    """Default engine config with the scenario's site host and a fixed seed."""
    overrides.setdefault("session", SessionConfig(seed=7))
    overrides.setdefault("site_host", scenario.site_host)
    return BlastConfig(**overrides)


def make_page(html: str, url: str = "http://t.example/login", status: int = 200, body: bytes = None) -> ResponsePage:
    data = html.encode("utf-8") if body is None else body
    return ResponsePage(status=status, final_url=url, body=data, elapsed=1.0, decoded_text=html)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
CRITERIA_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA_LINES):
        terminalreporter.write_line(CRITERIA_LINES[number])
