import pytest

# filled by tests/test_acceptance.py: (number, title, ok, detail)
ACCEPTANCE_RESULTS = []


@pytest.fixture
def acceptance():
    def record(number, title, ok, detail=""):
        ACCEPTANCE_RESULTS.append((number, title, bool(ok), detail))
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
