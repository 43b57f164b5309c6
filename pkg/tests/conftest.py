import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE: list = []


@pytest.fixture
def acceptance_line():
    def record(number, ok, text):
        ACCEPTANCE.append((number, ok, text))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, text in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {text}")
