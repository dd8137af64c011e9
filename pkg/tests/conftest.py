import numpy as np
import pytest

from privremap.kernels import available_backends
from privremap.model import ModelParams


@pytest.fixture
def unit():
    return ModelParams(1.0, 1.0, 1.0, 1.0, 0.5)


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


def random_params(rng: np.random.Generator, p_h: float = 0.5) -> ModelParams:
    """Variances log-uniform on [0.05, 20]."""
    s2mu, s2s, s2e, s2w = np.exp(rng.uniform(np.log(0.05), np.log(20.0), size=4))
    return ModelParams(float(s2mu), float(s2s), float(s2e), float(s2w), p_h)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
