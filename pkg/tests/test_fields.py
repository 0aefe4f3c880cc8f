"""Grid-function operations: truncations, norms, superlevel sums, file I/O."""

import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.integrate import quad

from singlab.exponents import ANY_FINITE, INF
from singlab.fields import (
    Field,
    GridSpec,
    excess,
    h1_seminorm,
    half_box_indicator,
    load_field,
    lp_norm,
    save_field,
    superlevel_integral,
    truncate,
)

RNG = np.random.default_rng(2024)


def random_field(grid, scale=3.0, nonnegative=False):
    vals = RNG.normal(size=grid.shape) * scale
    if nonnegative:
        vals = np.abs(vals)
    return Field(grid, vals)


class TestGridSpec:
    def test_spacing(self):
        grid = GridSpec(1, 127)
        assert grid.h == pytest.approx(1.0 / 128.0)
        assert grid.shape == (127,)

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(4, 8)
        with pytest.raises(ValueError):
            GridSpec(2, 2)

    def test_theory_off_flag(self):
        assert GridSpec(2, 8).theory_off
        assert not GridSpec(3, 8).theory_off


class TestFieldConstruction:
    def test_shape_checked(self):
        grid = GridSpec(2, 4)
        with pytest.raises(ValueError):
            Field(grid, np.zeros((4, 5)))

    def test_flat_values_reshaped(self):
        grid = GridSpec(2, 4)
        f = Field(grid, np.arange(16.0))
        assert f.values.shape == (4, 4)

    def test_values_frozen(self):
        f = Field.constant(GridSpec(1, 4), 1.0)
        with pytest.raises(ValueError):
            f.values[0] = 2.0


class TestTruncations:
    def test_clamp_example(self):
        f = Field(GridSpec(1, 3), np.array([-5.0, 0.5, 7.0]))
        assert truncate(f, 1.0).values.tolist() == [-1.0, 0.5, 1.0]

    def test_zero_level(self):
        f = random_field(GridSpec(2, 5))
        assert np.all(truncate(f, 0.0).values == 0.0)

    def test_excess_example(self):
        f = Field(GridSpec(1, 3), np.array([-5.0, 0.5, 7.0]))
        assert excess(f, 1.0).values.tolist() == [-4.0, 0.0, 6.0]

    def test_excess_above_sup(self):
        f = random_field(GridSpec(2, 5))
        assert np.all(excess(f, f.sup() + 1.0).values == 0.0)

    def test_negative_level_rejected(self):
        f = random_field(GridSpec(1, 4))
        with pytest.raises(ValueError):
            truncate(f, -1.0)
        with pytest.raises(ValueError):
            excess(f, -0.5)

    def test_split_identity_nodewise(self):
        # T_k + G_k reassembles the field to one ulp (bitwise equality is
        # unattainable: the excess branch double-rounds |v| - k, then + k)
        f = random_field(GridSpec(3, 6))
        for k in (0.0, 0.7, 2.5):
            total = truncate(f, k).values + excess(f, k).values
            assert np.allclose(total, f.values, rtol=5e-16, atol=0.0)
            inactive = np.abs(f.values) <= k
            assert np.array_equal(total[inactive], f.values[inactive])

    def test_truncation_bounded_excess_supported(self):
        f = random_field(GridSpec(2, 8))
        k = 1.2
        assert truncate(f, k).sup() <= k
        g = excess(f, k).values
        assert np.all((np.abs(f.values) > k) | (g == 0.0))

    def test_excess_composes_on_nonnegative_fields(self):
        f = random_field(GridSpec(2, 7), nonnegative=True)
        j, k = 0.6, 0.9
        composed = excess(excess(f, j), k).values
        direct = excess(f, j + k).values
        assert np.allclose(composed, direct, atol=0.0)


class TestLpNorm:
    def test_constant_field_l1(self):
        grid = GridSpec(2, 9)
        c = 2.5
        expected = c * grid.num_nodes * grid.cell_volume
        assert lp_norm(Field.constant(grid, c), 1) == pytest.approx(expected)

    def test_sup_norm(self):
        f = Field(GridSpec(1, 3), np.array([-3.0, 2.0, 0.0]))
        assert lp_norm(f, INF) == 3.0
        assert lp_norm(f, math.inf) == 3.0

    def test_sine_l2_against_quadrature(self):
        grid = GridSpec(1, 127)
        f = Field.from_function(grid, lambda x: np.sin(np.pi * x))
        oracle = math.sqrt(quad(lambda x: math.sin(math.pi * x) ** 2, 0.0, 1.0)[0])
        assert abs(lp_norm(f, 2) - oracle) < 1e-3

    def test_any_finite_rejected(self):
        f = Field.constant(GridSpec(1, 4), 1.0)
        with pytest.raises(ValueError):
            lp_norm(f, ANY_FINITE)

    def test_exponent_below_one_rejected(self):
        f = Field.constant(GridSpec(1, 4), 1.0)
        with pytest.raises(ValueError):
            lp_norm(f, 0.5)

    def test_monotone_in_p_on_unit_box(self):
        f = random_field(GridSpec(2, 12))
        ps = [1, F(6, 5), 2, 3, 7, 20]
        norms = [lp_norm(f, p) for p in ps]
        for a, b in zip(norms, norms[1:]):
            assert a <= b * (1 + 1e-12)


class TestH1Seminorm:
    def test_zero_field(self):
        assert h1_seminorm(Field.zeros(GridSpec(3, 4))) == 0.0

    def test_sine_profile(self):
        grid = GridSpec(1, 127)
        f = Field.from_function(grid, lambda x: np.sin(np.pi * x))
        assert abs(h1_seminorm(f) - math.pi / math.sqrt(2.0)) < 1e-2

    def test_homogeneity(self):
        f = random_field(GridSpec(2, 9))
        c = -3.7
        scaled = Field(f.grid, c * f.values)
        assert h1_seminorm(scaled) == pytest.approx(abs(c) * h1_seminorm(f), rel=1e-13)

    def test_vanishes_only_at_zero(self):
        # Dirichlet boundary pins constants: any nonzero field has energy
        grid = GridSpec(2, 6)
        f = Field.constant(grid, 1.0)
        assert h1_seminorm(f) > 0.5


class TestSuperlevelIntegral:
    def test_empty_superlevel_set(self):
        f = random_field(GridSpec(2, 6), nonnegative=True)
        w = Field.constant(f.grid, 1.0)
        assert superlevel_integral(f, w, f.sup() + 1.0) == 0.0

    def test_full_box(self):
        grid = GridSpec(3, 8)
        one = Field.constant(grid, 1.0)
        value = superlevel_integral(one, one, 0.5)
        assert value == pytest.approx(grid.interior_measure)
        assert abs(value - 1.0) < 3.0 * grid.h  # boundary layer only

    def test_against_nodewise_loop(self):
        grid = GridSpec(2, 7)
        f = random_field(grid)
        w = random_field(grid)
        h_level = 0.3
        acc = 0.0
        for idx in np.ndindex(*grid.shape):
            if f.values[idx] >= h_level:
                acc += w.values[idx]
        assert superlevel_integral(f, w, h_level) == pytest.approx(acc * grid.cell_volume)


class TestFieldIO:
    def test_roundtrip_exact(self, tmp_path):
        f = random_field(GridSpec(2, 6))
        path = tmp_path / "field.txt"
        save_field(f, path)
        g = load_field(path)
        assert g.grid == f.grid
        assert np.array_equal(g.values, f.values)

    def test_header_format(self, tmp_path):
        f = Field.constant(GridSpec(3, 4), 1.0)
        path = tmp_path / "field.txt"
        save_field(f, path)
        assert path.read_text().splitlines()[0] == "3,4"

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "field.txt"
        path.write_text("bogus\n1.0\n")
        with pytest.raises(ValueError):
            load_field(path)

    def test_wrong_count_rejected(self, tmp_path):
        path = tmp_path / "field.txt"
        path.write_text("1,4\n1.0\n2.0\n")
        with pytest.raises(ValueError):
            load_field(path)


def test_half_box_indicator():
    grid = GridSpec(2, 15)
    f = half_box_indicator(grid)
    x, y = grid.meshgrid()
    inside = (np.abs(x - 0.5) <= 0.25) & (np.abs(y - 0.5) <= 0.25)
    assert np.array_equal(f.values.astype(bool), inside)
