import pytest

from isle.circuit import CircuitTiming, get_builtin
from isle.gates import DEFAULT_TABLE_STEP, SurrogateModel
from isle.params import make_parameter_set


def make_timing(circuit="GateChain", params="ThrPar", coupling=None, table_step=DEFAULT_TABLE_STEP, circ=None):
    model = SurrogateModel()
    if coupling is not None:
        model = model.with_coupling(coupling)
    circ = circ if circ is not None else get_builtin(circuit)
    return CircuitTiming(circ, model, make_parameter_set(params), table_step)


@pytest.fixture
def timing():
    return make_timing()


@pytest.fixture
def exact_timing():
    return make_timing(coupling=0.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
