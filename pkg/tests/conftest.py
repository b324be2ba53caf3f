import pytest

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}
ACCEPTANCE_COUNT = 10


@pytest.fixture
def acceptance():
    def record(number, passed, detail=""):
        ACCEPTANCE_RESULTS[number] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    ran = any("test_acceptance" in r.nodeid
              for reports in terminalreporter.stats.values() for r in reports
              if hasattr(r, "nodeid"))
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_COUNT + 1):
        if n in ACCEPTANCE_RESULTS:
            ok, detail = ACCEPTANCE_RESULTS[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN")
