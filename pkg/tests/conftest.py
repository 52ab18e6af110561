import warnings
from pathlib import Path

import pytest

from eqsingular import equilibrium as eq, model
from eqsingular.config import load_config

ROOT = Path(__file__).resolve().parents[1]
CANONICAL = ROOT / "instances" / "remark52.cfg"


@pytest.fixture(scope="session")
def canon_cfg():
    return load_config(CANONICAL)


@pytest.fixture(scope="session")
def canon(canon_cfg):
    return canon_cfg.instance


@pytest.fixture(scope="session")
def canon_grid(canon_cfg):
    return canon_cfg.grid


@pytest.fixture(scope="session")
def small_grid(canon_grid):
    # coarse grid for quick structural tests (aligned: 40 / 20 = 2)
    return canon_grid.replace(Nx=121, Nt=41, Ns=21)


@pytest.fixture(scope="session")
def canon_solution(canon, canon_grid):
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        return eq.solve_equilibrium(canon, canon_grid)


@pytest.fixture(scope="session")
def exp_canon(canon):
    return canon.replace(discount=model.ExponentialDiscount(0.3))


@pytest.fixture(scope="session")
def exp_oracle(exp_canon, canon_grid):
    return eq.exponential_oracle(exp_canon, canon_grid)


@pytest.fixture(scope="session")
def flat_canon(canon):
    # beta == 1: no time inconsistency
    return canon.replace(discount=model.ExponentialDiscount(0.0))


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Record one line per acceptance criterion; printed in the terminal summary."""
    log = request.config.stash[ACCEPTANCE]

    def record(number, passed, detail):
        log[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log):
        terminalreporter.write_line(log[number])
