import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion for the end-of-run summary."""
    def record(number, detail):
        _CRITERIA[number] = [None, detail]
        return _CRITERIA[number]
    yield record
    rep = getattr(request.node, "rep_call", None)
    for entry in _CRITERIA.values():
        if entry[0] is None:
            entry[0] = rep is not None and rep.passed


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
