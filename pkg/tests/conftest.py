import pytest

from helpers import chain_data
from resbn.data import load_reservoirs


@pytest.fixture(scope="session")
def reservoirs():
    return load_reservoirs()


@pytest.fixture(scope="session")
def complete(reservoirs):
    return reservoirs.complete_cases()


@pytest.fixture
def chain():
    return chain_data(1000, seed=1)


_criteria = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_c" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        detail = dict(report.user_properties).get("detail", "")
        _criteria[report.nodeid] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (outcome, detail) in sorted(_criteria.items()):
        name = nodeid.split("::")[-1][len("test_"):]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status} {name}: {detail}")
