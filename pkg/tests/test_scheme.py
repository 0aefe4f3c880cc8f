"""Inner solves, the alternating fixed point, and level sweeps."""

import math
from fractions import Fraction as F

import numpy as np
import pytest

from singlab.exponents import Params
from singlab.fields import Field, GridSpec, lp_norm
from singlab.operators import CoefficientField, assemble, cg_solve, grad_product
from singlab.scheme import (
    IterationControl,
    ProblemData,
    residual_record,
    solve_level,
    solve_u_given_v,
    solve_v_given_u,
    sweep_levels,
    truncate_datum,
)
from conftest import make_problem

RNG = np.random.default_rng(99)


class TestTruncateDatum:
    def test_small_datum_unchanged(self):
        grid = GridSpec(2, 5)
        f = Field(grid, np.abs(RNG.normal(size=grid.shape)))
        n = int(math.ceil(f.sup())) + 1
        assert np.array_equal(truncate_datum(f, n).values, f.values)

    def test_constant_clipped(self):
        grid = GridSpec(1, 4)
        out = truncate_datum(Field.constant(grid, 10.0), 3)
        assert np.all(out.values == 3.0)

    def test_nodewise_min_oracle(self):
        grid = GridSpec(2, 6)
        f = Field(grid, 5.0 * np.abs(RNG.normal(size=grid.shape)))
        out = truncate_datum(f, 2).values
        for idx in np.ndindex(*grid.shape):
            assert out[idx] == min(f.values[idx], 2.0)

    def test_level_validated(self):
        with pytest.raises(ValueError):
            truncate_datum(Field.constant(GridSpec(1, 4), 1.0), 0)


class TestProblemData:
    def test_negative_datum_rejected(self):
        grid = GridSpec(2, 5)
        data = make_problem(n_cells=5)
        with pytest.raises(ValueError):
            data.with_datum(Field.constant(grid, -1.0))

    def test_trivial_datum_flagged(self):
        data = make_problem(n_cells=5, f_value=0.0)
        assert data.trivial_datum

    def test_theory_off_for_low_dimensional_grids(self):
        assert make_problem(d=2, n_cells=5).theory_off
        assert not make_problem(n_cells=5).theory_off


class TestSolveUGivenV:
    def test_zero_datum_zero_solution(self):
        data = make_problem(d=2, n_cells=6, f_value=0.0)
        u, info = solve_u_given_v(data, Field.zeros(data.grid), n=4)
        assert np.all(u.values == 0.0)
        assert info.iterations == 1 and info.converged

    def test_negative_v_rejected(self):
        data = make_problem(n_cells=4)
        with pytest.raises(ValueError):
            solve_u_given_v(data, Field.constant(data.grid, -1.0), n=1)

    def test_small_gamma_approaches_linear_solve(self):
        # gamma -> 0 with a deep level: the singular factor tends to 1
        data = make_problem(d=2, n_cells=15, gamma=F(1, 1000))
        u, _ = solve_u_given_v(data, Field.zeros(data.grid), n=10**6)
        linear, _ = cg_solve(assemble(data.coeff, 0.0), data.f, tol=1e-12)
        rel = np.max(np.abs(u.values - linear.values)) / np.max(linear.values)
        assert rel < 0.01

    def test_unique_fixed_point_from_two_starts(self):
        it = IterationControl()
        data = make_problem(n_cells=8)
        v = Field(data.grid, np.abs(RNG.normal(size=data.grid.shape)))
        u_a, _ = solve_u_given_v(data, v, n=4, it=it, u0=Field.zeros(data.grid))
        u_b, _ = solve_u_given_v(data, v, n=4, it=it, u0=Field.constant(data.grid, 1.0))
        assert np.max(np.abs(u_a.values - u_b.values)) <= 10.0 * it.tol_inner

    def test_output_nonnegative(self):
        data = make_problem(n_cells=8, r=F(7, 2), gamma=F(9, 10))
        v = Field(data.grid, np.abs(RNG.normal(size=data.grid.shape)))
        u, _ = solve_u_given_v(data, v, n=2)
        assert u.min() >= 0.0


class TestSolveVGivenU:
    def test_zero_u_gives_zero_v(self):
        data = make_problem(n_cells=6)
        v, info = solve_v_given_u(data, Field.zeros(data.grid), n=4)
        assert np.all(v.values == 0.0)

    def test_theta_zero_is_single_linear_solve(self):
        data = make_problem(n_cells=8, theta=0)
        u = Field(data.grid, np.abs(RNG.normal(size=data.grid.shape)))
        v, info = solve_v_given_u(data, u, n=4)
        assert info.iterations == 1
        direct, _ = cg_solve(
            assemble(data.coeff, 0.0), Field(data.grid, u.values ** 2), tol=1e-12
        )
        assert np.allclose(v.values, direct.values, atol=1e-10)

    def test_theta_half_self_consistency(self):
        # recompute the right side from the converged v: equation must close
        data = make_problem(d=1, n_cells=31)
        u = Field.constant(data.grid, 1.0)
        n = 4
        v, _ = solve_v_given_u(data, u, n=n)
        res = residual_record(data, u, v, n)
        assert res.v_rel < 1e-6

    def test_negative_u_rejected(self):
        data = make_problem(n_cells=4)
        with pytest.raises(ValueError):
            solve_v_given_u(data, Field.constant(data.grid, -0.5), n=1)


class TestSolveLevel:
    def test_trivial_datum_immediate(self):
        data = make_problem(n_cells=6, f_value=0.0)
        state = solve_level(data, 4)
        assert state.converged and state.outer_iters == 1
        assert np.all(state.u.values == 0.0) and np.all(state.v.values == 0.0)

    def test_default_level_self_consistent(self, default_sweep):
        state = next(s for s in default_sweep.states if s.n == 8)
        assert state.converged
        assert state.residuals.u_rel <= 1e-6
        assert state.residuals.v_rel <= 1e-6
        assert state.u_min >= 0.0
        assert state.v_strictly_positive()

    def test_monotone_in_datum(self):
        # doubling f does not decrease u (exploratory comparison, small grid)
        base = make_problem(n_cells=8)
        state_1 = solve_level(base, 4)
        state_2 = solve_level(base.scaled(2.0), 4)
        assert np.all(state_2.u.values >= state_1.u.values - 1e-8)

    def test_level_validated(self):
        with pytest.raises(ValueError):
            solve_level(make_problem(n_cells=4), 0)

    def test_second_equation_energy_identity(self, default_sweep, default_problem):
        # coefficient-weighted energy of v equals the reaction pairing
        state = next(s for s in default_sweep.states if s.n == 16)
        lhs = grad_product(default_problem.coeff, state.v, state.v)
        shift = 1.0 / state.n
        rhs = default_problem.grid.cell_volume * float(
            np.sum(state.u.values**2 * (state.v.values + shift) ** -0.5 * state.v.values)
        )
        assert lhs == pytest.approx(rhs, rel=1e-6)

    def test_level_boundedness_certificate(self):
        # sup u_n stays under C n^(1+gamma) with C pinned at the first level
        data = make_problem(n_cells=8)
        states = [solve_level(data, n) for n in (1, 2, 4)]
        c = states[0].u.sup()
        for s in states:
            assert s.u.sup() <= c * s.n ** 1.5 * (1 + 1e-9)


class TestSweep:
    def test_single_level_schedule(self):
        data = make_problem(n_cells=6)
        sweep = sweep_levels(data, (2,))
        assert len(sweep.states) == 1 and sweep.cauchy_diffs == []

    def test_schedule_validated(self):
        data = make_problem(n_cells=6)
        with pytest.raises(ValueError):
            sweep_levels(data, (2, 2))
        with pytest.raises(ValueError):
            sweep_levels(data, ())

    def test_truncation_inactive_for_bounded_datum(self):
        # f = 1 is below every level, so f_n = f and only the 1/n shift moves
        data = make_problem(n_cells=6)
        for n in (2, 4):
            assert np.array_equal(truncate_datum(data.f, n).values, data.f.values)

    def test_records_carry_norm_columns(self, default_sweep):
        rec = default_sweep.records[0]
        assert {"n", "converged", "sup_u", "h1_u", "res_u_rel"} <= set(rec)
        assert any(key.startswith("lp_u[bounded") for key in rec)

    def test_cauchy_differences_recorded(self, default_sweep):
        assert len(default_sweep.cauchy_diffs) == len(default_sweep.states) - 1
        assert all(d > 0 for d in default_sweep.cauchy_diffs)

    def test_parallel_jobs_bitwise_match(self):
        data = make_problem(n_cells=6)
        seq = sweep_levels(data, (1, 2))
        par = sweep_levels(data, (1, 2), jobs=2)
        for a, b in zip(seq.states, par.states):
            assert np.array_equal(a.u.values, b.u.values)
            assert np.array_equal(a.v.values, b.v.values)
