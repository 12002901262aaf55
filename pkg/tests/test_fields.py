import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsegment import (
    DeformationParams,
    InvalidParameterError,
    OmegaSet,
    build_gaussian_kernel,
    convolve_separable,
    derive_stream,
    generate_displacement_field,
    kernel_radius,
    round_half_away,
)

import oracles


class TestRoundHalfAway:
    @pytest.mark.parametrize(
        "value,expected",
        [(4.5, 5), (-4.5, -5), (2.4, 2), (-2.4, -2), (0.0, 0), (0.5, 1), (-0.5, -1), (9.6, 10)],
    )
    def test_scalars(self, value, expected):
        assert round_half_away(value) == expected

    @given(st.floats(min_value=-1e6, max_value=1e6))
    def test_matches_reference(self, value):
        assert round_half_away(value) == oracles.round_half_away(value)


class TestKernelRadius:
    @pytest.mark.parametrize("sigma,radius,size", [(1, 3, 7), (3, 9, 19), (5, 15, 31), (10, 30, 61)])
    def test_default_sigmas(self, sigma, radius, size):
        assert kernel_radius(sigma) == radius
        assert build_gaussian_kernel(sigma).size == size

    def test_small_sigma_floor(self):
        assert kernel_radius(0.1) == 1

    @pytest.mark.parametrize("sigma", [0, -1, -0.5])
    def test_rejects_nonpositive(self, sigma):
        with pytest.raises(InvalidParameterError):
            kernel_radius(sigma)
        with pytest.raises(InvalidParameterError):
            build_gaussian_kernel(sigma)


class TestGaussianKernel:
    @pytest.mark.parametrize("sigma", [1, 3, 5, 10])
    def test_normalized(self, sigma):
        kernel = build_gaussian_kernel(sigma)
        assert abs(kernel.weights.sum() - 1.0) <= 1e-9

    @pytest.mark.parametrize("sigma", [1, 3, 5, 10])
    def test_strictly_positive_and_peaked(self, sigma):
        kernel = build_gaussian_kernel(sigma)
        assert (kernel.weights > 0).all()
        center = kernel.weights[kernel.radius, kernel.radius]
        assert center == kernel.weights.max()

    @pytest.mark.parametrize("sigma", [1, 3, 5, 10])
    def test_symmetry_exact(self, sigma):
        weights = build_gaussian_kernel(sigma).weights
        assert (weights == weights[::-1, ::-1]).all()
        assert (weights == weights.T).all()

    def test_center_ratio_sigma5(self):
        kernel = build_gaussian_kernel(5)
        ratio = kernel.weights[kernel.radius, kernel.radius] / kernel.weights[kernel.radius, kernel.radius + 1]
        assert ratio == pytest.approx(math.e ** (1.0 / 50.0), abs=1e-12)

    def test_corner_is_strict_minimum_sigma3(self):
        weights = build_gaussian_kernel(3).weights
        corner = weights[0, 0]
        interior = weights.ravel().copy()
        assert corner == weights.min()
        assert (interior > corner).sum() == interior.size - 4  # only the 4 corners tie

    @pytest.mark.parametrize("sigma", [1, 2.5, 5])
    def test_matches_density_oracle(self, sigma):
        kernel = build_gaussian_kernel(sigma)
        assert np.abs(kernel.weights - oracles.gaussian_weights(sigma)).max() <= 1e-12


class TestSmoothing:
    def test_separable_equals_direct_2d(self, rng):
        noise = rng.standard_normal((16, 16))
        for sigma in (1, 3, 5, 10):
            kernel = build_gaussian_kernel(sigma)
            separable = convolve_separable(noise, kernel)
            direct = oracles.dense_conv2d(noise, kernel.weights)
            assert np.abs(separable - direct).max() <= 1e-9


class TestDisplacementField:
    def test_zero_alpha_gives_zero_field(self):
        field = generate_displacement_field(9, 7, DeformationParams(0, 3), derive_stream(1, 2, 3))
        assert not field.dx.any()
        assert not field.dy.any()

    def test_bound_alpha100(self):
        field = generate_displacement_field(
            32, 32, DeformationParams(100, 3), derive_stream(7, 0, 0)
        )
        assert max(np.abs(field.dx).max(), np.abs(field.dy).max()) <= 100.0

    def test_matches_dense_eq_oracle(self):
        # Same draws through both routes: alpha*(2u-1) noise, then smoothing.
        params = DeformationParams(15, 3)
        probe = derive_stream(99, 4, 1)
        noise_x = params.alpha * (2.0 * probe.random((4, 4)) - 1.0)
        noise_y = params.alpha * (2.0 * probe.random((4, 4)) - 1.0)
        expected_dx = oracles.displacement_from_noise(noise_x, params.sigma)
        expected_dy = oracles.displacement_from_noise(noise_y, params.sigma)

        field = generate_displacement_field(4, 4, params, derive_stream(99, 4, 1))
        assert np.abs(field.dx - expected_dx).max() <= 1e-9
        assert np.abs(field.dy - expected_dy).max() <= 1e-9

    def test_dimensions_match_request(self):
        field = generate_displacement_field(5, 11, DeformationParams(15, 5), derive_stream(0, 0, 0))
        assert field.width == 5 and field.height == 11
        assert field.dx.shape == (11, 5)

    def test_dx_drawn_before_dy(self):
        # Swapping in a fresh stream at the dy position must reproduce dx.
        params = DeformationParams(30, 3)
        field = generate_displacement_field(6, 6, params, derive_stream(5, 5, 5))
        probe = derive_stream(5, 5, 5)
        noise_x = params.alpha * (2.0 * probe.random((6, 6)) - 1.0)
        expected_dx = oracles.displacement_from_noise(noise_x, params.sigma)
        assert np.abs(field.dx - expected_dx).max() <= 1e-9

    @pytest.mark.parametrize("w,h", [(0, 4), (4, 0), (0, 0), (-1, 3)])
    def test_rejects_empty_lattice(self, w, h):
        with pytest.raises(InvalidParameterError):
            generate_displacement_field(w, h, DeformationParams(15, 3), derive_stream(0, 0, 0))

    def test_deterministic_across_runs(self):
        params = DeformationParams(50, 5)
        a = generate_displacement_field(12, 12, params, derive_stream(42, 9, 2))
        b = generate_displacement_field(12, 12, params, derive_stream(42, 9, 2))
        assert (a.dx == b.dx).all() and (a.dy == b.dy).all()

    def test_bound_holds_across_pool(self, rng):
        # Spot-check the convex-combination bound over the default pool.
        for pair_index, params in enumerate(OmegaSet.default().pairs):
            for rep in range(5):
                field = generate_displacement_field(
                    16, 16, params, derive_stream(11, pair_index, rep)
                )
                bound = params.alpha
                assert np.abs(field.dx).max() <= bound
                assert np.abs(field.dy).max() <= bound


class TestDeformationParams:
    def test_rejects_negative_alpha(self):
        with pytest.raises(InvalidParameterError):
            DeformationParams(-1, 3)

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(InvalidParameterError):
            DeformationParams(10, 0)


@settings(max_examples=30)
@given(
    sigma=st.floats(min_value=0.5, max_value=12.0),
    alpha=st.floats(min_value=0.0, max_value=100.0),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_field_bound_property(sigma, alpha, seed):
    params = DeformationParams(alpha, sigma)
    field = generate_displacement_field(8, 8, params, derive_stream(seed, 0, 0))
    limit = alpha * (1.0 + 1e-12)
    assert np.abs(field.dx).max() <= limit
    assert np.abs(field.dy).max() <= limit
