import numpy as np
import pytest

from asyflexa.generators import GeneratorSpec, generate
from asyflexa.problem import BlockPartition, L1Reg, LeastSquares, ProblemSpec


@pytest.fixture(scope="session")
def lasso_small():
    return generate(GeneratorSpec(kind="lasso-dense", n=40, N=8, lam=0.1, seed=3))


@pytest.fixture(scope="session")
def lasso_200():
    return generate(GeneratorSpec(kind="lasso-dense", n=200, N=20, lam=0.1, seed=1))


@pytest.fixture(scope="session")
def ncc_small():
    return generate(GeneratorSpec(kind="ncc-ball-qp", n=10, N=5, seed=2))


@pytest.fixture(scope="session")
def dc_small():
    return generate(GeneratorSpec(kind="dc-least-squares", n=20, N=5, lam=0.05, seed=4))


def identity_lasso(n=2, lam=1.0, b=None):
    part = BlockPartition([1] * n)
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    return ProblemSpec(part, LeastSquares(np.eye(n), b, part), regs=[L1Reg(lam) for _ in range(n)])


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one pass/fail line per acceptance criterion; echoed in the terminal summary."""
    def log(number, ok, detail):
        line = f"{'PASS' if ok is True else 'FAIL' if ok is False else ok} criterion {number}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok
    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
