"""Operator builders: stencil entries, similarity maps, serialization."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from etabs import (
    MarketParams,
    PotentialSpec,
    SimilarityMap,
    TridiagonalOperator,
    build_H_BS,
    build_H_eff,
    build_H_generalized,
    build_h_BS,
    build_rho,
    build_rho_generalized,
    conjugate,
    make_lattice,
    operator_from_dict,
    operator_to_dict,
)


class TestMarketParams:
    def test_valid(self):
        p = MarketParams(sigma=0.3, r=0.0)
        assert p.sigma == 0.3 and p.r == 0.0

    @pytest.mark.parametrize("sigma, r", [(0.0, 0.05), (-0.2, 0.05), (math.nan, 0.05), (0.2, -0.01), (0.2, math.inf)])
    def test_invalid_raises(self, sigma, r):
        with pytest.raises(ValueError):
            MarketParams(sigma=sigma, r=r)


class TestPotentialSpec:
    def test_zero_and_constant(self, small_lattice):
        assert_array_equal(PotentialSpec.zero().realize(small_lattice), np.zeros(60))
        assert_array_equal(PotentialSpec.constant(0.07).realize(small_lattice), np.full(60, 0.07))

    def test_tabulated_round_trip(self, small_lattice):
        v = np.tanh(small_lattice.points)
        assert_array_equal(PotentialSpec.tabulated(v).realize(small_lattice), v)

    def test_tabulated_wrong_length(self, small_lattice):
        spec = PotentialSpec.tabulated(np.ones(10))
        with pytest.raises(ValueError, match="does not match lattice"):
            spec.realize(small_lattice)

    def test_barrier_mask_values(self, small_lattice):
        spec = PotentialSpec.barrier_mask(-0.5, 0.5, wall=123.0)
        v = spec.realize(small_lattice)
        inside = (small_lattice.points >= -0.5) & (small_lattice.points <= 0.5)
        assert_array_equal(v[inside], 0.0)
        assert_array_equal(v[~inside], 123.0)

    @pytest.mark.parametrize("bad", [lambda: PotentialSpec.constant(math.inf),
                                     lambda: PotentialSpec.barrier_mask(1.0, -1.0),
                                     lambda: PotentialSpec.barrier_mask(0.0, 1.0, wall=-5.0),
                                     lambda: PotentialSpec(kind="mystery")])
    def test_invalid_specs_raise(self, bad):
        with pytest.raises(ValueError):
            bad()


class TestTridiagonalOperator:
    def test_shape_validation(self, small_lattice):
        with pytest.raises(ValueError, match="band shapes"):
            TridiagonalOperator(
                diag=np.zeros(60), upper=np.zeros(60), lower=np.zeros(59), lattice=small_lattice
            )

    def test_nonfinite_rejected(self, small_lattice):
        diag = np.zeros(60)
        diag[5] = math.nan
        with pytest.raises(ValueError, match="non-finite"):
            TridiagonalOperator(
                diag=diag, upper=np.zeros(59), lower=np.zeros(59), lattice=small_lattice
            )

    @given(
        diag=arrays(np.float64, 9, elements=st.floats(-10, 10)),
        upper=arrays(np.float64, 8, elements=st.floats(-10, 10)),
        lower=arrays(np.float64, 8, elements=st.floats(-10, 10)),
        vec=arrays(np.float64, 9, elements=st.floats(-10, 10)),
    )
    @settings(max_examples=60, deadline=None)
    def test_apply_matches_dense(self, diag, upper, lower, vec):
        lat = make_lattice(0.0, 1.0, 9)
        H = TridiagonalOperator(diag=diag, upper=upper, lower=lower, lattice=lat)
        assert_allclose(H.apply(vec), H.to_dense() @ vec, atol=1e-12)

    def test_infinity_norm_matches_dense(self, plain_params, small_lattice):
        H = build_H_BS(plain_params, small_lattice)
        dense_norm = np.abs(H.to_dense()).sum(axis=1).max()
        assert H.infinity_norm() == pytest.approx(dense_norm, rel=1e-15)

    def test_is_symmetric(self, plain_params, small_lattice):
        assert build_h_BS(plain_params, small_lattice).is_symmetric()
        assert not build_H_BS(plain_params, small_lattice).is_symmetric()


class TestBuildHBS:
    def test_stencil_entries(self, plain_params):
        lat = make_lattice(-2.0, 2.0, 50)
        H = build_H_BS(plain_params, lat)
        sig2 = plain_params.sigma**2
        a = sig2 / (2 * lat.dx**2)
        b = (sig2 / 2 - plain_params.r) / (2 * lat.dx)
        assert_array_equal(H.diag, np.full(50, sig2 / lat.dx**2 + plain_params.r))
        assert_array_equal(H.upper, np.full(49, -a + b))
        assert_array_equal(H.lower, np.full(49, -a - b))

    def test_interior_row_sums_are_rate(self, plain_params):
        # constants are killed up to the rate term: H 1 = r 1 away from walls
        lat = make_lattice(-2.0, 2.0, 200)
        out = build_H_BS(plain_params, lat).apply(np.ones(200))
        assert_allclose(out[1:-1], plain_params.r, atol=1e-10)

    def test_kills_discounted_forward_price_to_first_order(self, plain_params):
        # continuum identity H e^x = 0; the centered stencil leaves O(dx^2)
        lat = make_lattice(-0.5, 0.5, 400)
        g = np.exp(lat.points)
        out = build_H_BS(plain_params, lat).apply(g)
        assert np.abs(out[1:-1]).max() < 10 * lat.dx**2


class TestBuildhBS:
    def test_free_laplacian_plus_constant(self, plain_params):
        lat = make_lattice(-2.0, 2.0, 50)
        h = build_h_BS(plain_params, lat)
        sig2 = plain_params.sigma**2
        a = sig2 / (2 * lat.dx**2)
        const = (sig2 / 2 + plain_params.r) ** 2 / (2 * sig2)
        assert h.is_symmetric()
        assert_array_equal(h.diag, np.full(50, 2 * a + const))
        assert_array_equal(h.upper, np.full(49, -a))


class TestBuildGeneralized:
    def test_constant_rate_reduces_to_plain(self, plain_params, small_lattice):
        H_gen = build_H_generalized(
            plain_params.sigma, PotentialSpec.constant(plain_params.r), small_lattice
        )
        H_bs = build_H_BS(plain_params, small_lattice)
        assert_array_equal(H_gen.diag, H_bs.diag)
        assert_array_equal(H_gen.upper, H_bs.upper)
        assert_array_equal(H_gen.lower, H_bs.lower)

    def test_row_consistent_bands(self, plain_params):
        # upper[i] carries V(x_i), lower[i] carries V(x_{i+1}): each band entry
        # belongs to the row it lives in
        lat = make_lattice(-1.0, 1.0, 30)
        v = 0.05 + 0.01 * np.tanh(lat.points)
        H = build_H_generalized(plain_params.sigma, PotentialSpec.tabulated(v), lat)
        sig2 = plain_params.sigma**2
        a = sig2 / (2 * lat.dx**2)
        b = (sig2 / 2 - v) / (2 * lat.dx)
        assert_allclose(H.upper, -a + b[:-1], rtol=1e-15)
        assert_allclose(H.lower, -a - b[1:], rtol=1e-15)
        assert_allclose(H.diag, sig2 / lat.dx**2 + v, rtol=1e-15)

    def test_interior_row_sums_are_potential(self, plain_params):
        # the affine-kill property generalizes: row sum at x_k equals V(x_k)
        lat = make_lattice(-1.0, 1.0, 300)
        v = 0.05 + 0.01 * np.tanh(lat.points)
        H = build_H_generalized(plain_params.sigma, PotentialSpec.tabulated(v), lat)
        out = H.apply(np.ones(300))
        assert_allclose(out[1:-1], v[1:-1], atol=1e-9)


class TestBuildHEff:
    def test_adds_potential_to_diagonal_only(self, plain_params, small_lattice):
        v = 0.5 * np.cos(small_lattice.points)
        H_eff = build_H_eff(plain_params, PotentialSpec.tabulated(v), small_lattice)
        H_bs = build_H_BS(plain_params, small_lattice)
        assert_array_equal(H_eff.diag, H_bs.diag + v)
        assert_array_equal(H_eff.upper, H_bs.upper)
        assert_array_equal(H_eff.lower, H_bs.lower)


class TestSimilarity:
    def test_rho_entries(self, plain_params, small_lattice):
        rho = build_rho(plain_params, small_lattice)
        expo = -(0.5 - plain_params.r / plain_params.sigma**2) * small_lattice.points
        assert_allclose(rho.rho, np.exp(expo), rtol=1e-15)

    def test_inverse_round_trip(self, plain_params, small_lattice):
        H = build_H_BS(plain_params, small_lattice)
        rho = build_rho(plain_params, small_lattice)
        back = conjugate(conjugate(H, rho), rho.inverse())
        assert_allclose(back.upper, H.upper, rtol=1e-13)
        assert_allclose(back.lower, H.lower, rtol=1e-13)
        assert_array_equal(back.diag, H.diag)

    def test_nonpositive_rho_rejected(self):
        with pytest.raises(ValueError, match="strictly positive"):
            SimilarityMap(rho=np.array([1.0, -1.0, 2.0]))

    def test_conjugation_action_approaches_h_BS(self, plain_params):
        # rho H rho^{-1} and h_BS are different second-order discretizations of
        # the same operator: their actions on a smooth function agree to O(dx^2)
        # even though individual matrix entries do not
        diffs = []
        for n in (100, 200, 400):
            lat = make_lattice(-2.0, 2.0, n)
            H_conj = conjugate(build_H_BS(plain_params, lat), build_rho(plain_params, lat))
            h = build_h_BS(plain_params, lat)
            f = np.exp(-4.0 * lat.points**2)
            diffs.append(np.abs(H_conj.apply(f) - h.apply(f)).max())
        assert diffs[0] / diffs[1] == pytest.approx(4.0, rel=0.3)
        assert diffs[1] / diffs[2] == pytest.approx(4.0, rel=0.3)

    def test_generalized_rho_squares_to_metric(self, plain_params, small_lattice):
        from etabs import continuum_metric_generalized

        V = PotentialSpec.tabulated(0.05 + 0.01 * np.tanh(small_lattice.points))
        rho = build_rho_generalized(plain_params.sigma, V, small_lattice)
        eta = continuum_metric_generalized(plain_params.sigma, V, small_lattice).eta
        assert_allclose(rho.rho**2, eta, rtol=1e-13)


class TestSerialization:
    def test_dict_round_trip_bitwise(self, plain_params):
        lat = make_lattice(-1.3, 0.9, 23)
        H = build_H_generalized(
            plain_params.sigma,
            PotentialSpec.tabulated(np.sin(lat.points)),
            lat,
        )
        doc = json.loads(json.dumps(operator_to_dict(H)))
        back = operator_from_dict(doc)
        assert_array_equal(back.diag, H.diag)
        assert_array_equal(back.upper, H.upper)
        assert_array_equal(back.lower, H.lower)
        assert_array_equal(back.lattice.points, lat.points)
        assert back.lattice.dx == lat.dx

    def test_missing_key_raises(self):
        with pytest.raises(ValueError, match="missing keys"):
            operator_from_dict({"n": 3})
