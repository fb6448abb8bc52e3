import numpy as np
import pytest

from npvq import synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def ar2_short():
    return synthetic.ar2_source(1600, seed=7)


@pytest.fixture(scope="session")
def voiced_short():
    return synthetic.voiced_source(1600, seed=3)


def random_stationary_vectors(rng, n, m, order=2):
    """Stable vector AR(order) sequence with random mixing."""
    A = [rng.standard_normal((m, m)) for _ in range(order)]
    scale = 0.8 / (sum(np.linalg.norm(a, 2) for a in A) + 1e-9)
    A = [a * scale for a in A]
    x = np.zeros((n + 100, m))
    for t in range(order, n + 100):
        x[t] = sum(A[i] @ x[t - 1 - i] for i in range(order)) + rng.standard_normal(m)
    return x[100:]


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion and echo it."""
    def record(number, ok, detail, status=None):
        line = f"[criterion {number}] {status or ('PASS' if ok else 'FAIL')}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
