from __future__ import annotations

import pytest

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture
def record():
    def _record(num: int, ok: bool, detail: str):
        ACCEPTANCE[num] = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE[num])
    return _record
