import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# acceptance verdicts, printed in the terminal summary
VERDICTS: dict[int, tuple[bool, str]] = {}


def record_verdict(number: int, passed: bool, detail: str) -> None:
    VERDICTS[number] = (passed, detail)


@pytest.fixture(scope="session")
def warm():
    from mapsolver.localsearch import warm_up

    warm_up()


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        passed, detail = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
