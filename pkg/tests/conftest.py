import numpy as np
import pytest
from hypothesis import settings

from heavysums.tailmodel import SlowlyVarying, TailModel

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


MODEL_MATRIX = [
    TailModel(1.5),
    TailModel(1.5, gamma=1.0),
    TailModel(1.5, gamma=-1.0),
    TailModel(2.0),
    TailModel(3.0, gamma=0.5),
    TailModel(4.0),
    TailModel(1.2, gamma=2.0, L=SlowlyVarying.log_power(1.0)),
    TailModel(1.5, variant="loglog", kappa=1.0),
    TailModel(1.5, variant="loglog", kappa=-1.0),
    TailModel(1.0, variant="superheavy", kappa=1.0),
    TailModel(1.0, variant="superheavy", kappa=2.0, scale=0.5),
]


@pytest.fixture(params=range(len(MODEL_MATRIX)), ids=lambda i: f"m{i}")
def any_model(request):
    return MODEL_MATRIX[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, repeated at the end of the run
@pytest.fixture
def acceptance_lines(request):
    return request.config.__dict__.setdefault("acceptance_lines", {})


def pytest_terminal_summary(terminalreporter):
    lines = terminalreporter.config.__dict__.get("acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
