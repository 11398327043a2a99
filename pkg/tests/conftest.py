from fractions import Fraction

import pytest

from lossq.dist import Discrete

ACCEPTANCE_LINES: list[str] = []

ID_ATOMS = [(0.3, 1 / 3), (0.6, 1 / 3), (1.5, 1 / 3)]
ID_ATOMS_EXACT = [(Fraction(3, 10), Fraction(1, 3)), (Fraction(6, 10), Fraction(1, 3)),
                  (Fraction(15, 10), Fraction(1, 3))]


@pytest.fixture
def id1():
    """The three-atom degenerate process used by every Table 1 configuration."""
    return Discrete(ID_ATOMS)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
