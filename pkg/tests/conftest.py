import numpy as np
import pytest

from stationary_dpp.kernel import build_kernel
from stationary_dpp.sampler import sample_batch
from stationary_dpp.symbol import bernoulli_symbol, sine_symbol, trig_symbol

# per-criterion outcomes collected by test_acceptance, printed at the end
ACCEPTANCE = {}


def record(criterion, passed, detail=""):
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}  {detail}")


@pytest.fixture(scope="session")
def sine():
    return sine_symbol()


@pytest.fixture(scope="session")
def bern():
    return bernoulli_symbol(0.3)


@pytest.fixture(scope="session")
def trig():
    return trig_symbol()


@pytest.fixture(scope="session")
def trig_batch_64(trig):
    """Shared trig-polynomial batch: 64 sites, 1e5 samples."""
    kw = build_kernel(trig, 64)
    return sample_batch(kw, 5150, 100_000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
