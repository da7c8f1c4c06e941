import numpy as np
import pytest

from ferrovi.constitutive import Law, cantilever_params, patch_test_params


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def patch_quadratic():
    return patch_test_params(Law.QUADRATIC)


@pytest.fixture
def patch_saturating():
    return patch_test_params(Law.SATURATING)


@pytest.fixture
def cantilever():
    return cantilever_params()


def random_state(rng, params, dim=3, p_fraction=0.9):
    """Random (S, D, P) vector with |P| below ``p_fraction`` P0."""
    n = 6 if dim == 3 else 3
    S = rng.normal(size=n) * 2e-3
    P = rng.normal(size=dim)
    P *= rng.uniform(0.0, p_fraction) * params.P0 / np.linalg.norm(P)
    D = P + rng.normal(size=dim) * params.eps * 3.0 * params.E0
    return np.concatenate([S, D, P])


# --- acceptance report --------------------------------------------------------

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Record (and print) the verdict line of one acceptance criterion."""

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
