import numpy as np
import pytest

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_spd(rng, d, cond=50.0):
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = np.exp(rng.uniform(0, np.log(cond), d))
    return (Q * eig) @ Q.T


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
