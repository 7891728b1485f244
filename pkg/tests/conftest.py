import numpy as np
import pytest

from tsteer.control import LocalizedControl, assemble_control_to_state, solve_global_control
from tsteer.cutoffs import build_covering, build_partition
from tsteer.flows import ObservableSpec, build_return_profile
from tsteer.saturation import GeneratorSet
from tsteer.spectral import ScalarField, grid_of

OMEGA = (0.5, 4.7, 0.5, 4.7)

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture(scope="session")
def grid128():
    return grid_of(128)


@pytest.fixture(scope="session")
def covering():
    return build_covering(OMEGA, 36)


@pytest.fixture(scope="session")
def flow(covering):
    return build_return_profile(covering)


@pytest.fixture(scope="session")
def bundle128(covering, grid128):
    return build_partition(covering, grid128)


@pytest.fixture(scope="session")
def observable(flow):
    profile, schedule = flow
    return ObservableSpec(GeneratorSet(((1, 0), (0, 1))), schedule.phase, strength=1.0)


@pytest.fixture(scope="session")
def operator128(grid128, observable):
    return assemble_control_to_state(grid128, observable, 64)


@pytest.fixture(scope="session")
def diagonal_solution(grid128, operator128):
    x1, x2 = grid128.nodes
    return solve_global_control(ScalarField(grid128, np.sin(x1 + x2)), 0.1, operator128)


@pytest.fixture(scope="session")
def diagonal_control(diagonal_solution, operator128, bundle128, flow):
    return LocalizedControl(diagonal_solution, operator128, bundle128, flow[0])


@pytest.fixture(scope="session")
def lowmode_control(grid128, operator128, bundle128, flow):
    x1, x2 = grid128.nodes
    sol = solve_global_control(ScalarField(grid128, np.cos(x1) + np.sin(x2)), 0.05, operator128)
    return LocalizedControl(sol, operator128, bundle128, flow[0])
