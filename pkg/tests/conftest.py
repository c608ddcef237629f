import threading

import numpy as np
import pytest

from qubof.protocol import SolverConfig, make_server

# the 4x4 worked example: optimum x = (0, 1, 1, 0) with value -24
EXAMPLE_Q = np.array(
    [
        [6, 0, 5, -9],
        [0, 0, -3, 2],
        [5, -3, -18, 2],
        [-9, 2, 2, -2],
    ],
    dtype=float,
)


@pytest.fixture
def example_q():
    return EXAMPLE_Q.copy()


@pytest.fixture
def server():
    """A solver server on an ephemeral loopback port."""
    srv = make_server("127.0.0.1:0", SolverConfig())
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record a one-line PASS/FAIL for an acceptance criterion; shown in the terminal summary."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def report(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
