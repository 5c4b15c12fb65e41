import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=np.uint64(20240817)))


def slow_ising_energy(J, h, spins):
    """Independent loop-based energy oracle (all ordered pairs)."""
    n = len(spins)
    e = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                e -= J[i][j] * spins[i] * spins[j]
        e -= h[i] * spins[i]
    return e


def enumerate_min(J, h):
    """Exhaustive minimum by explicit enumeration (independent of the package)."""
    n = len(h)
    best, best_cfg = np.inf, []
    for idx in range(1 << n):
        s = [1 if (idx >> b) & 1 else -1 for b in range(n)]
        e = slow_ising_energy(J, h, s)
        if e < best - 1e-12:
            best, best_cfg = e, [s]
        elif abs(e - best) <= 1e-12:
            best_cfg.append(s)
    return best_cfg, best
