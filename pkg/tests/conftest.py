"""Per-criterion summary for tests marked ``@pytest.mark.acceptance("ACn")``."""

import pytest

CRITERIA = {
    "AC1": "published benchmark numbers (requires the real dataset and pretrained backbones)",
    "AC2": "formula suite against examples and oracles, under 10 s",
    "AC3": "analytic vs finite-difference gradients on 100 instances, under 30 s",
    "AC4": "full model beats SF+MF ablation and MLR fusion on test SRCC (3 seeds)",
    "AC5": "overfit sanity: train SRCC >= 0.95 within 200 epochs, under 2 min",
    "AC6": "bit-identical checkpoint, predictions and metrics across two runs",
    "AC7": "structural invariants and round-trips over >= 200 cases each",
    "AC8": "rank-loss values as printed",
}

_outcomes = {}
_details = {}


@pytest.fixture
def record(request):
    """Attach a short measurement string to the criterion of the running test."""
    marker = request.node.get_closest_marker("acceptance")
    key = marker.args[0] if marker else None

    def _record(text):
        if key:
            _details.setdefault(key, []).append(text)

    return _record


def pytest_runtest_logreport(report):
    key = getattr(report, "_acceptance_key", None)
    if key is None:
        return
    if report.when == "call" or report.outcome != "passed":
        state = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        prev = _outcomes.get(key)
        if prev == "FAIL" or (prev == "PASS" and state == "SKIP"):
            return
        _outcomes[key] = state


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker:
        report._acceptance_key = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key, desc in CRITERIA.items():
        state = _outcomes.get(key, "NOT RUN")
        extra = "; ".join(_details.get(key, []))
        tr.write_line(f"{key} {state:7s} {desc}" + (f" [{extra}]" if extra else ""))
