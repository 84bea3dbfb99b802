import zlib

import numpy as np
import pytest


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_hamiltonian(rng, n, spread=3.0):
    """Random Hermitian ``H`` with smallest eigenvalue exactly near 1."""
    a = random_hermitian(rng, n)
    w = np.linalg.eigvalsh(a)
    a = (a - w[0] * np.eye(n)) * (spread / max(w[-1] - w[0], 1e-12))
    return a + np.eye(n)


@pytest.fixture
def rng(request):
    # One stream per test so test order does not matter.
    return np.random.default_rng(zlib.crc32(request.node.name.encode()))


# Lines recorded by the acceptance suite, echoed after the test run.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section('acceptance criteria')
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
