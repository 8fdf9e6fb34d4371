"""Acceptance bookkeeping: one pass/fail line per criterion at the end of the run."""

import pytest

_outcomes = {}  # criterion -> (title, passed)
_notes = {}  # criterion -> [str]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")


def _marker(item):
    m = item.get_closest_marker("criterion")
    return (m.args[0], m.args[1]) if m else None


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mk = _marker(item)
    if mk is None or rep.when not in ("setup", "call"):
        return
    n, title = mk
    ok = rep.passed or (rep.when == "setup" and not rep.failed)
    prev = _outcomes.get(n, (title, True))[1]
    if rep.when == "call" or not ok:
        _outcomes[n] = (title, prev and ok)


@pytest.fixture
def note(request):
    """Attach a measured value to the criterion line of the requesting test."""
    mk = _marker(request.node)

    def add(text):
        if mk is not None:
            _notes.setdefault(mk[0], []).append(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        title, ok = _outcomes[n]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title}")
        for text in _notes.get(n, []):
            tr.write_line(f"         {text}")
