import json
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(str(resources.files("siko").joinpath("data")))


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def gold_rows() -> list[dict]:
    with open(DATA / "gold_fixture.jsonl", encoding="utf-8") as f:
        return [json.loads(line) for line in f]


_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.outcome != "passed":
        _ACCEPTANCE[name] = "failed" if report.failed else _ACCEPTANCE.get(name, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for name, title in CRITERIA.items():
        if name in _ACCEPTANCE:
            verdict = "PASS" if _ACCEPTANCE[name] == "passed" else "FAIL"
            terminalreporter.write_line(f"{verdict}  {title}")
