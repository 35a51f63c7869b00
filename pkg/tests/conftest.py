import pytest

# Filled by tests/test_acceptance.py: criterion number -> (passed, one-line summary).
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def acceptance_record():
    def record(number: int, status: str, summary: str) -> None:
        ACCEPTANCE[number] = (status, summary)
        print(f"criterion {number}: {status} {summary}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, summary = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status:4s} {summary}")
