import numpy as np
import pytest

from drsurv.data import Dataset

# criterion number -> list of (label, passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def record_criterion(number, label, passed, detail=""):
    ACCEPTANCE_RESULTS.setdefault(number, []).append((label, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        checks = ACCEPTANCE_RESULTS[number]
        verdict = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}")
        for label, ok, detail in checks:
            mark = "pass" if ok else "FAIL"
            terminalreporter.write_line(f"    [{mark}] {label}  {detail}")


def random_dataset(rng, n, p, censor_rate=0.4, tau=None):
    """Continuous (tie-free) times with a random censoring pattern."""
    time = rng.exponential(size=n) + 1e-3
    event = (rng.uniform(size=n) > censor_rate).astype(int)
    return Dataset.from_arrays(time, event, rng.uniform(-1, 1, size=(n, p)), tau=tau)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)
