"""Shared fixtures and the end-of-run acceptance summary."""

import pytest

import helpers

TESTDATA = helpers.TESTDATA


@pytest.fixture(scope="session")
def h2_grid():
    from vqederiv.grid import load_grid
    return load_grid(TESTDATA / "h2_hessian" / "manifest.json")


@pytest.fixture(scope="session")
def h2_head(h2_grid):
    """Converged adaptive circuit for the base H2 Hamiltonian."""
    from vqederiv.adapt import adapt_build
    result = adapt_build(h2_grid.hamiltonian(()), occupations=(0, 1))
    assert result.converged
    return result


@pytest.fixture(scope="session")
def h3p_grid():
    from vqederiv.grid import load_grid
    return load_grid(TESTDATA / "h3p_deriv" / "manifest.json")


@pytest.fixture(scope="session")
def h3p_head(h3p_grid):
    """Converged adaptive circuit for the base H3+ Hamiltonian."""
    from vqederiv.adapt import adapt_build
    result = adapt_build(h3p_grid.hamiltonian(()), occupations=(0, 1))
    assert result.converged
    return result


def pytest_terminal_summary(terminalreporter):
    if helpers.ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance summary")
        for line in helpers.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
