import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import stieltjes_fraction
from strategies import distributions, lipschitz_weightings

from risklab.errors import DomainError
from risklab.riskdist import (
    DiscreteDistribution,
    WeightingFunction,
    cdf_sup_distance,
    cvar,
    make_weighting,
    phi_cdf,
    phi_quantile,
    quantile,
)

COIN = DiscreteDistribution.from_pairs([(0.0, 0.5), (1.0, 0.5)])


class TestDistribution:
    def test_rejects_bad_mass(self):
        with pytest.raises(DomainError):
            DiscreteDistribution([0.0, 1.0], [0.5, 0.6])
        with pytest.raises(DomainError):
            DiscreteDistribution([0.0, 1.0], [1.5, -0.5])

    def test_rejects_unsorted_grid(self):
        with pytest.raises(DomainError):
            DiscreteDistribution([1.0, 0.0], [0.5, 0.5])

    def test_cdf_right_continuous(self):
        assert COIN.cdf(0.0) == 0.5
        assert COIN.cdf(-1e-12) == 0.0
        assert COIN.cdf(1.0) == 1.0

    def test_json_roundtrip(self):
        d = DiscreteDistribution.from_dict(json.loads(json.dumps(COIN.to_dict())))
        assert cdf_sup_distance(d, COIN) == 0.0
        assert set(COIN.to_dict()) == {"grid", "mass"}

    def test_from_lattice_prunes_dust(self):
        d = DiscreteDistribution.from_lattice([0.5, 1e-17, 0.5], 0.25)
        assert list(d.grid) == [0.0, 0.5]


class TestQuantile:
    def test_median_of_coin_is_lower_point(self):
        assert quantile(COIN, 0.5) == 0.0

    def test_just_above_median(self):
        assert quantile(COIN, 0.51) == 1.0

    def test_point_mass(self):
        assert quantile(DiscreteDistribution.point(3.0), 0.7) == 3.0

    def test_zero_level_is_minimum(self):
        assert quantile(COIN, 0.0) == 0.0

    @pytest.mark.parametrize("tau", [-0.1, 1.1, math.nan])
    def test_out_of_range(self, tau):
        with pytest.raises(DomainError):
            quantile(COIN, tau)


class TestWeighting:
    def test_cvar_values(self):
        g = make_weighting("cvar", 0.25)
        assert g(0.1) == pytest.approx(0.4)
        assert g.lipschitz == 4

    def test_expectation(self):
        g = make_weighting("expectation")
        assert g(0.37) == 0.37 and g.lipschitz == 1

    def test_var_is_a_step_at_alpha(self):
        # G is the CDF of a point mass at alpha, so Phi picks out F^dagger(alpha)
        g = make_weighting("var", 0.3)
        assert g(0.3) == 1.0 and g(0.31) == 1.0 and g(0.29) == 0.0
        assert math.isinf(g.lipschitz) and not g.is_lipschitz
        d = DiscreteDistribution.from_pairs([(0.0, 0.2), (1.0, 0.2), (2.0, 0.6)])
        assert phi_quantile(d, g) == quantile(d, 0.3) == 1.0

    @pytest.mark.parametrize("alpha", [0.0, -0.5, 1.01])
    def test_bad_alpha(self, alpha):
        with pytest.raises(DomainError):
            make_weighting("cvar", alpha)
        with pytest.raises(DomainError):
            make_weighting("var", alpha)

    def test_piecewise_validation(self):
        with pytest.raises(DomainError):
            make_weighting("piecewise_linear", knots=[(0, 0), (0.5, 0.8), (1, 0.7)])
        with pytest.raises(DomainError):
            make_weighting("piecewise_linear", knots=[(0.1, 0), (1, 1)])
        g = make_weighting("piecewise_linear", knots=[(0, 0), (0.5, 0.8), (1, 1)])
        assert g.lipschitz == pytest.approx(1.6)

    def test_json(self):
        g = make_weighting("cvar", 0.25)
        assert g.to_dict() == {"kind": "cvar", "alpha": 0.25}
        assert WeightingFunction.from_dict(g.to_dict()) == g


class TestPhi:
    def test_coin_expectation(self):
        w = make_weighting("cvar", 1.0)
        assert phi_quantile(COIN, w) == pytest.approx(0.5)
        assert phi_cdf(COIN, make_weighting("expectation")) == pytest.approx(0.5)

    def test_coin_cvar_three_quarters(self):
        w = make_weighting("cvar", 0.75)
        assert phi_quantile(COIN, w) == pytest.approx(1 / 3, abs=1e-15)
        assert phi_cdf(COIN, w) == pytest.approx(1 / 3, abs=1e-15)

    @given(st.floats(-100, 100), lipschitz_weightings())
    def test_point_mass_any_weighting(self, c, w):
        d = DiscreteDistribution.point(c)
        assert phi_quantile(d, w) == pytest.approx(c, abs=1e-12)
        assert phi_cdf(d, w) == c

    @given(distributions(), lipschitz_weightings())
    def test_two_forms_agree(self, d, w):
        assert abs(phi_quantile(d, w) - phi_cdf(d, w)) <= 1e-9

    def test_rational_oracle(self):
        # exact rational arithmetic on a 3-atom law with CVaR(2/5)
        grid = [Fraction(0), Fraction(1, 2), Fraction(3)]
        mass = [Fraction(1, 5), Fraction(3, 10), Fraction(1, 2)]
        alpha = Fraction(2, 5)
        exact = stieltjes_fraction(grid, mass, lambda t: min(t / alpha, Fraction(1)))
        d = DiscreteDistribution([float(x) for x in grid], [float(x) for x in mass])
        assert phi_quantile(d, make_weighting("cvar", 0.4)) == pytest.approx(float(exact), abs=1e-15)
        assert float(exact) == 0.25

    @given(distributions(), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_cvar_monotone_in_alpha(self, d, a, b):
        lo, hi = sorted((a, b))
        assert cvar(d, lo) <= cvar(d, hi) + 1e-9
        assert cvar(d, hi) <= d.mean() + 1e-9


class TestQuantileAlgebra:
    @given(distributions())
    def test_galois(self, d):
        for z, F in zip(d.grid, d.cumulative):
            assert quantile(d, min(F, 1.0)) <= z
        for tau in np.linspace(0, 1, 101):
            assert d.cdf(quantile(d, tau)) >= tau - 1e-12

    @given(distributions(lattice=0.25), st.integers(0, 3), st.data())
    def test_shift_domination(self, b, k, data):
        # A is B shifted down by at most k lattice steps per atom
        eta = 0.25
        shifts = data.draw(st.lists(st.integers(0, k), min_size=b.grid.size, max_size=b.grid.size))
        pairs = [(z - s * eta, p) for z, s, p in zip(b.grid, shifts, b.mass)]
        merged = {}
        for z, p in pairs:
            merged[round(z / eta)] = merged.get(round(z / eta), 0.0) + p
        a = DiscreteDistribution.from_pairs([(i * eta, p) for i, p in merged.items()])
        shift = k * eta
        pts = np.union1d(a.grid, b.grid)
        assert np.all(a.cdf(pts) <= b.cdf(pts + shift) + 1e-12)
        for tau in np.linspace(0, 1, 41):
            assert quantile(a, tau) >= quantile(b, tau) - shift - 1e-12
