import numpy as np
import pytest

from dynrmat.liealg import coxeter_automorphism, decompose, identity_automorphism, make_sl, outer_automorphism_sl


class Fix:
    def __init__(self, L, cd, dec):
        self.L, self.cd, self.dec = L, cd, dec

    def vec(self, name):
        return self.L.unit(name)


def _coxeter(n):
    L, cd = make_sl(n)
    return Fix(L, cd, decompose(L, coxeter_automorphism(cd)))


@pytest.fixture(scope="session")
def sl2():
    return _coxeter(2)


@pytest.fixture(scope="session")
def sl3():
    return _coxeter(3)


@pytest.fixture(scope="session")
def sl2_id():
    L, cd = make_sl(2)
    return Fix(L, cd, decompose(L, identity_automorphism(L)))


@pytest.fixture(scope="session")
def sl3_outer():
    L, cd = make_sl(3)
    return Fix(L, cd, decompose(L, outer_automorphism_sl(L, cd)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def report_criterion():
    def emit(number, title, passed, detail, seconds, limit):
        line = (f"criterion {number} [{title}]: {'PASS' if passed else 'FAIL'}  {detail}  "
                f"runtime {seconds:.2f}s (limit {limit:g}s)")
        ACCEPTANCE_LINES.append(line)
        print(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
