import json
from pathlib import Path

import pytest

from rl2adn.grid import bundled_case_path

ROOT = Path(__file__).resolve().parents[1]


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running training checks")


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return ROOT


def case_dict(name: str) -> dict:
    return json.loads(bundled_case_path(name).read_text(encoding="utf-8"))


def fleet_dict(name: str) -> dict:
    from importlib import resources

    path = resources.files("rl2adn") / "data" / "fleets" / f"{name}.json"
    return json.loads(path.read_text(encoding="utf-8"))


# acceptance verdicts, printed after the run ---------------------------------

_VERDICTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    _VERDICTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance")
    for n in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[n])
