import pytest

from gibbsk.geometry import PolarizedModel, build_quadrature, conic_density


@pytest.fixture(scope="session")
def model():
    return PolarizedModel(1)


@pytest.fixture(scope="session")
def q(model):
    return build_quadrature(64, 128, model)


@pytest.fixture(scope="session")
def q_small(model):
    return build_quadrature(32, 64, model)


@pytest.fixture(scope="session")
def north():
    return [0.0, 0.0, 1.0]


@pytest.fixture(scope="session")
def conic_half(q, north):
    return conic_density([north], 0.5, q)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
