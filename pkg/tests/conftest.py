import numpy as np
import pytest

from amvp_lab.data import compute_returns, load_price_panel
from amvp_lab.fixtures import fixture_path


@pytest.fixture(scope="session")
def fixture_csv_path():
    return str(fixture_path())


@pytest.fixture(scope="session")
def fixture_returns(fixture_csv_path):
    with open(fixture_csv_path, encoding="utf-8") as fh:
        return compute_returns(load_price_panel(fh))


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    a = rng.standard_normal((n, rank))
    return a @ a.T / rank + (1e-3 * np.eye(n) if rank == n else 0.0)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
