import pytest

CRITERIA = {
    1: "weight axiom suite",
    2: "excision integral oracle",
    3: "Sobolev norms",
    4: "oscillator exactness",
    5: "Gronwall energy bound",
    6: "activator construction",
    7: "infinite-loss signature",
    8: "solver convergence",
    9: "cone condition",
}

_outcomes = {}
_details = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance summary."""
    marker = request.node.get_closest_marker("criterion")

    def add(text):
        if marker is not None:
            _details.setdefault(marker.args[0], []).append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if rep.when == "call" or rep.failed or rep.skipped:
        ok = rep.passed and rep.when == "call"
        _outcomes.setdefault(n, []).append(ok)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, name in CRITERIA.items():
        if n not in _outcomes:
            tr.write_line(f"criterion {n} ({name}): NOT RUN")
            continue
        verdict = "PASS" if all(_outcomes[n]) else "FAIL"
        extra = "; ".join(_details.get(n, []))
        tr.write_line(f"criterion {n} ({name}): {verdict}" + (f"  [{extra}]" if extra else ""))
