import pytest

_RESULTS: dict[int, str] = {}


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records one acceptance verdict."""

    def record(n: int, ok: bool, detail: str):
        _RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_RESULTS[n])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_RESULTS):
            terminalreporter.write_line(_RESULTS[n])
