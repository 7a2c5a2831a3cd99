import warnings

import numpy as np
import pytest

from cpl.dynamics import edge_transfer_scenario, run_transfer
from cpl.params import OmParams

_VERDICTS: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    """Record a one-line PASS/FAIL verdict; echoed in the terminal summary."""
    def record(ok: bool, label: str, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}: {label}"
        if detail:
            line += f"  [{detail}]"
        print(line)
        _VERDICTS.append(line)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _VERDICTS:
        terminalreporter.section("acceptance checks")
        for line in _VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def p_std():
    """Standard bulk parameter point: G=2, delta_om=3, J=200, 2pi/3 pattern."""
    return OmParams.from_detuning(3.0, G=2.0, J=200.0)


@pytest.fixture(scope="session")
def p_edge():
    """Edge-transport point: delta_om=3, 3pi/2 pattern (upper edge moves right)."""
    return OmParams.from_detuning(3.0, G=2.0, J=200.0, delta_theta=1.5 * np.pi)


@pytest.fixture(scope="session")
def straight_result():
    """The straight-edge transfer run with a greedy receiver (about a minute);
    shared by the dynamics examples and several acceptance criteria."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_transfer(edge_transfer_scenario("straight"))
