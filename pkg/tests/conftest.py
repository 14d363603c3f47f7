import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import cases  # noqa: E402
from bstc.bracket import dirichlet_bracket  # noqa: E402
from bstc.dirichlet import DirichletProblem, SolverConfig, solve_extremal  # noqa: E402
from bstc.iterate import extremal_fixed_point  # noqa: E402

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture(scope="session")
def spec_fl():
    return cases.spec_floor()


@pytest.fixture(scope="session")
def bracket_fl(spec_fl):
    return dirichlet_bracket(spec_fl, k=12.0)


@pytest.fixture(scope="session")
def sol_fl(spec_fl, bracket_fl):
    return solve_extremal(DirichletProblem(spec_fl, 9.0, 1.0, bracket_fl), "greatest", SolverConfig())


@pytest.fixture(scope="session")
def spec_mi():
    return cases.spec_meanint()


@pytest.fixture(scope="session")
def bracket_mi(spec_mi):
    return cases.bracket_meanint(spec_mi)


@pytest.fixture(scope="session")
def fp_mi(spec_mi, bracket_mi):
    return extremal_fixed_point(spec_mi, bracket_mi, "greatest", SolverConfig())
