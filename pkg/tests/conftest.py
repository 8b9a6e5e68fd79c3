import pytest

# (criterion, passed, detail) lines recorded by the acceptance tests
ACCEPTANCE = []


def record(criterion, passed, detail):
    ACCEPTANCE.append((criterion, bool(passed), detail))
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
    return passed


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE, key=lambda x: str(x[0])):
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
