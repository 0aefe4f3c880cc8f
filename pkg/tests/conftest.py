"""Shared fixtures: the expensive solves are done once per session."""

import time
from fractions import Fraction as F

import pytest

from singlab import CoefficientField, Field, GridSpec, Params, ProblemData
from singlab.experiments import solve_datum_family
from singlab.scheme import sweep_levels

DEFAULT_SCHEDULE = (1, 2, 4, 8, 16, 32, 64)
DUAL_LAMBDAS = (1.0, 2.0, 4.0, 8.0)
DUAL_N_FIXED = 64


def make_problem(d=3, n_cells=16, r=2, gamma=F(1, 2), theta=F(1, 2), m=2, f_value=1.0):
    """Problem on a d-dimensional grid; d < 3 runs theory-off (params keep d=3)."""
    grid = GridSpec(d, n_cells)
    coeff = CoefficientField.constant(grid, 1.0)
    params = Params(d=max(d, 3), r=F(r), gamma=F(gamma), theta=F(theta), m=F(m))
    return ProblemData(params, grid, coeff, Field.constant(grid, f_value))


@pytest.fixture(scope="session")
def default_problem():
    """Baseline: d=3, 16^3, f = 1, r = 2, gamma = theta = 1/2, m = 2."""
    return make_problem()


@pytest.fixture(scope="session")
def default_sweep(default_problem):
    return sweep_levels(default_problem, DEFAULT_SCHEDULE)


@pytest.fixture(scope="session")
def dual_problem():
    return make_problem(m=F(6, 5))


@pytest.fixture(scope="session")
def dual_family(dual_problem):
    """Datum-family states for the scaling audits, with wall time."""
    t0 = time.perf_counter()
    states = solve_datum_family(dual_problem, DUAL_LAMBDAS, DUAL_N_FIXED)
    return states, time.perf_counter() - t0
