import pytest

from collapse_lab import model_from_dict

_criterion_lines = []


def record_criterion(line: str):
    _criterion_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criterion_lines):
            terminalreporter.write_line(line)


@pytest.fixture
def f1_model():
    # skewed base, one mean constraint
    return model_from_dict(
        {"k": 3, "Q": [0.2, 0.5, 0.3], "features": [[1.0, 2.0, 3.0]], "alpha": [2.0]}
    )


@pytest.fixture
def f2_model():
    # uniform base, same constraint; the projection is symmetric
    return model_from_dict(
        {"k": 3, "Q": [1 / 3, 1 / 3, 1 / 3], "features": [[1.0, 2.0, 3.0]], "alpha": [2.0]}
    )
