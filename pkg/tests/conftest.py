import numpy as np
import pytest

from trajgen import Trajectory
from trajgen.toy import TOY_CONFIG, random_archive, toy_vocabulary

TOY_SEED = 1234

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance_results[name] = report.outcome.upper()
    elif report.when == "setup" and report.outcome != "passed":
        _acceptance_results[name] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance_results):
        outcome = _acceptance_results[name]
        label = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"{label}  {name}")


@pytest.fixture(scope="session")
def vocab():
    return toy_vocabulary()


@pytest.fixture(scope="session")
def archive():
    return random_archive(TOY_CONFIG, seed=TOY_SEED)


@pytest.fixture(scope="session")
def base_trajectory(vocab):
    return Trajectory.from_pairs(
        [(vocab.encode("MALE"), 0.0), (vocab.encode("E11"), 42.0)]
    )
