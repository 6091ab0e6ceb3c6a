import numpy as np
import pytest

# collected by tests/test_acceptance.py; printed in the terminal summary
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool]] = {}


def record_acceptance(num: int, name: str, passed: bool) -> None:
    ACCEPTANCE_RESULTS[num] = (name, passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        name, passed = ACCEPTANCE_RESULTS[num]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} [{verdict}] {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
