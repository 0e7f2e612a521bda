import pytest

_CRITERIA = []


@pytest.fixture
def criterion(request):
    """Collects the outcome line for one acceptance criterion."""
    entry = {"name": request.node.name, "detail": "", "ok": None}
    _CRITERIA.append(entry)
    yield entry


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and "criterion" in item.fixturenames:
        for entry in _CRITERIA:
            if entry["name"] == item.name:
                entry["ok"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for entry in _CRITERIA:
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[entry["ok"]]
        terminalreporter.write_line(f"{status}  {entry['name']}  {entry['detail']}")
