import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cxeuler.errors import RadiusUndetermined
from cxeuler.fourier import (
    FourierField,
    NormSpec,
    bracket,
    convolve_direct,
    convolve_truncated,
    derivative,
    estimate_analyticity_radius,
    from_grid,
    norm,
    padded_size,
    product,
    sobolev,
    to_grid,
    wiener,
)


def random_field(rng, K, dim=1, support=None, m=1):
    shape = (m,) + (2 * K + 1,) * dim
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if support is not None:
        ks = np.arange(-K, K + 1)
        mask = np.abs(ks) <= support
        if dim == 1:
            c[:, ~mask] = 0
        else:
            c[:, ~mask, :] = 0
            c[:, :, ~mask] = 0
    return FourierField(dim, K, c)


seeds = st.integers(min_value=0, max_value=2**31 - 1)


class TestNorm:
    def test_single_mode_unweighted(self):
        f = FourierField.from_modes(1, 4, {2: 3.0})
        assert norm(f, NormSpec(0, 0)) == pytest.approx(3.0, rel=1e-15)

    def test_single_mode_radius_one(self):
        f = FourierField.from_modes(1, 4, {2: 3.0})
        assert norm(f, NormSpec(1, 0)) == pytest.approx(3 * math.e**2, rel=1e-15)

    def test_empty_field(self):
        for spec in (NormSpec(), NormSpec(0.5, 2.0), NormSpec(0, 1, "sobolev")):
            assert norm(FourierField.zeros(2, 3), spec) == 0.0

    def test_negative_parameters_rejected(self):
        with pytest.raises(ValueError):
            NormSpec(r=-0.1)
        with pytest.raises(ValueError):
            NormSpec(s=-1)

    def test_sobolev_matches_definition(self):
        rng = np.random.default_rng(3)
        f = random_field(rng, 6)
        ks = np.arange(-6, 7)
        expected = math.sqrt(np.sum((1 + ks**2) ** 1.5 * np.abs(f.coeffs[0]) ** 2))
        assert sobolev(f, 1.5) == pytest.approx(expected, rel=1e-14)

    def test_vector_valued_uses_euclidean_modulus(self):
        f = FourierField.from_modes(1, 2, {1: [3.0, 4.0j]})
        assert wiener(f, 0.0, 1.0) == pytest.approx(5 * math.sqrt(2), rel=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, lam=st.floats(-5, 5).filter(lambda x: x == 0 or abs(x) > 1e-100), r=st.floats(0, 1), s=st.floats(0, 2))
    def test_homogeneous_and_subadditive(self, seed, lam, r, s):
        rng = np.random.default_rng(seed)
        f, g = random_field(rng, 5, dim=2), random_field(rng, 5, dim=2)
        spec = NormSpec(r, s)
        assert norm(f * lam, spec) == pytest.approx(abs(lam) * norm(f, spec), rel=1e-12, abs=1e-300)
        assert norm(f + g, spec) <= norm(f, spec) + norm(g, spec) * (1 + 1e-12)


class TestProduct:
    def test_single_modes(self):
        f = FourierField.from_modes(1, 4, {1: 1.0})
        g = FourierField.from_modes(1, 4, {2: 1.0})
        h = product(f, g)
        assert dict((k, v[0]) for k, v in h.modes()) == {3: 1.0}

    def test_zero_factor(self):
        rng = np.random.default_rng(0)
        assert not np.any(product(random_field(rng, 5), FourierField.zeros(1, 5)).coeffs)

    def test_cosine_squared(self):
        # (e^{ix} + e^{-ix})^2 = e^{2ix} + 2 + e^{-2ix}
        f = FourierField.from_modes(1, 3, {1: 1.0, -1: 1.0})
        h = product(f, f)
        assert h.coeff(2)[0] == pytest.approx(1.0)
        assert h.coeff(-2)[0] == pytest.approx(1.0)
        assert h.coeff(0)[0] == pytest.approx(2.0)
        assert np.count_nonzero(np.abs(h.coeffs) > 1e-14) == 3

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            product(FourierField.zeros(1, 3), FourierField.zeros(2, 3))

    def test_matches_grid_multiplication(self):
        rng = np.random.default_rng(1)
        f, g = random_field(rng, 4, dim=2, support=2), random_field(rng, 4, dim=2, support=2)
        M = 16
        grid = to_grid(f.coeffs[0], 4, M, 2) * to_grid(g.coeffs[0], 4, M, 2)
        np.testing.assert_allclose(product(f, g).coeffs[0], from_grid(grid, 4, 2), atol=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, r=st.sampled_from([0.0, 0.1, 1.0]), dim=st.sampled_from([1, 2]))
    def test_algebra_property(self, seed, r, dim):
        rng = np.random.default_rng(seed)
        f, g = random_field(rng, 6, dim, support=3), random_field(rng, 6, dim, support=3)
        lhs = wiener(product(f, g), r)
        assert lhs <= wiener(f, r) * wiener(g, r) * (1 + 1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=seeds, K=st.integers(1, 12))
    def test_fft_and_direct_convolutions_agree(self, seed, K):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((3, 2 * K + 1)) + 1j * rng.standard_normal((3, 2 * K + 1))
        b = rng.standard_normal((3, 2 * K + 1)) + 1j * rng.standard_normal((3, 2 * K + 1))
        full = np.array([np.convolve(x, y)[K : 3 * K + 1] for x, y in zip(a, b)])
        np.testing.assert_allclose(convolve_direct(a, b, K), full, atol=1e-12)
        np.testing.assert_allclose(convolve_truncated(a, b, K), full, atol=1e-12)


class TestDerivative:
    def test_mode_one(self):
        d = derivative(FourierField.from_modes(1, 2, {1: 1.0}))
        assert d.coeff(1)[0] == 1j

    def test_constant(self):
        assert not np.any(derivative(FourierField.from_modes(1, 2, {0: 5.0})).coeffs)

    def test_invalid_axis(self):
        with pytest.raises(ValueError):
            derivative(FourierField.zeros(1, 2), axis=1)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, r=st.floats(0.05, 2.0), frac=st.floats(0.0, 0.95))
    def test_gradient_estimate(self, seed, r, frac):
        rng = np.random.default_rng(seed)
        f = random_field(rng, 10, dim=2)
        rp = frac * r
        lhs = wiener(derivative(f, 0), rp)
        assert lhs <= math.e / (r - rp) * wiener(f, r) * (1 + 1e-12)


class TestRadius:
    def test_pure_exponential(self):
        f = FourierField.from_modes(1, 20, {k: math.exp(-2 * k) for k in range(1, 21)})
        assert estimate_analyticity_radius(f) == pytest.approx(2.0, abs=1e-6)

    def test_flat(self):
        f = FourierField.from_modes(1, 5, {k: 1.0 for k in range(1, 6)})
        assert estimate_analyticity_radius(f) == pytest.approx(0.0, abs=1e-12)

    def test_algebraic_prefactor(self):
        f = FourierField.from_modes(1, 40, {k: float(bracket(k)) ** -2 * math.exp(-0.5 * k) for k in range(1, 41)})
        assert estimate_analyticity_radius(f) == pytest.approx(0.5, abs=0.05)

    def test_growth_clamped_at_zero(self):
        f = FourierField.from_modes(1, 6, {k: math.exp(0.3 * k) for k in range(1, 7)})
        assert estimate_analyticity_radius(f) == 0.0

    def test_too_few_modes(self):
        f = FourierField.from_modes(1, 5, {1: 1.0, 2: 0.5, 3: 1e-20})
        with pytest.raises(RadiusUndetermined):
            estimate_analyticity_radius(f)


class TestFieldStructure:
    def test_out_of_cutoff_rejected(self):
        with pytest.raises(ValueError):
            FourierField.from_modes(1, 2, {3: 1.0})

    def test_absent_modes_are_zero(self):
        f = FourierField.from_modes(2, 3, {(1, -2): 2.0})
        assert f.coeff((0, 0))[0] == 0
        assert f.coeff((7, 7))[0] == 0

    def test_real_flag(self):
        f = FourierField.from_modes(1, 3, {2: 1 + 2j, -2: 1 - 2j})
        assert f.is_real()
        assert not FourierField.from_modes(1, 3, {2: 1.0}).is_real()

    def test_json_round_trip(self):
        rng = np.random.default_rng(5)
        f = random_field(rng, 3, dim=2, m=2)
        g = FourierField.from_json(f.to_json())
        np.testing.assert_array_equal(f.coeffs, g.coeffs)

    def test_decay_csv(self):
        f = FourierField.from_modes(1, 3, {1: 3.0, -2: 4j})
        rows = f.decay_csv().strip().splitlines()
        assert rows[0] == "k,abs"
        assert sorted(rows[1:]) == ["-2,4.0", "1,3.0"]

    def test_grid_round_trip(self):
        rng = np.random.default_rng(2)
        f = random_field(rng, 5, dim=2)
        back = from_grid(to_grid(f.coeffs, 5, padded_size(5), 2), 5, 2)
        np.testing.assert_allclose(back, f.coeffs, atol=1e-13)
