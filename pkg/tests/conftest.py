import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from etrsolve import build_example_model, solve_constrained


@pytest.fixture(scope="session")
def ex60():
    """Chain example at N=60 with the hand-specified reference kernel."""
    return build_example_model(60, Fraction(1, 4), include_paper_p=True)


@pytest.fixture(scope="session")
def ex60_solved(ex60):
    m, kernel = ex60
    return solve_constrained(m, mode="rational", kernel_rows=kernel)


@pytest.fixture(scope="session")
def ex60_half():
    m, kernel = build_example_model(60, Fraction(1, 2), include_paper_p=True)
    return m, kernel, solve_constrained(m, mode="rational", kernel_rows=kernel)


@pytest.fixture(scope="session")
def ex8():
    """Small instance for fast assembly-level tests."""
    return build_example_model(8, Fraction(1, 4), include_paper_p=True)
