import numpy as np
import pytest

from reachavoid.library import random_model

# filled by tests/test_acceptance.py through the `criterion` fixture
_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion: ``criterion(n, title)`` then ``.detail = ...``."""
    marker = request.node.get_closest_marker("criterion")
    n, title = marker.args

    class Record:
        detail = ""

    rec = Record()
    yield rec
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed
    _CRITERIA[n] = (title, passed, rec.detail)


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
    for n in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[n]
        line = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


@pytest.fixture
def models(rng):
    return [random_model(rng) for _ in range(20)]
