import pytest

from kktprec.fem import build_problem

# criterion lines appended by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def problem_l2():
    return build_problem(2, 1e-2)


@pytest.fixture(scope="session")
def problem_l3():
    return build_problem(3, 1e-2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
