import pytest

ACCEPTANCE = {}


@pytest.fixture
def verdict(request):
    """Record one acceptance line for the terminal summary, then assert it."""

    def record(number, title, ok, detail=""):
        ACCEPTANCE[number] = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title}" + (f" ({detail})" if detail else "")
        print(ACCEPTANCE[number])
        assert ok, ACCEPTANCE[number]

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
