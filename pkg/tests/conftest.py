import pytest

from linred.smt import SolverConfig, default_solver_command


@pytest.fixture(scope="session")
def solver() -> SolverConfig:
    command, extra_env = default_solver_command()
    return SolverConfig(command=command, extra_env=extra_env)
