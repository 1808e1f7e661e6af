import pytest

# criterion number -> (passed, one-line detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    def record(number, title, passed, detail):
        ACCEPTANCE[number] = (title, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}")
