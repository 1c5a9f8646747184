"""Tests for Gaussian-kernel covariates."""

import numpy as np
import pytest

from covnmf.errors import ConfigurationError, DegenerateFeatureError, DimensionError
from covnmf.kernel import (
    FeatureScaling,
    KernelConfig,
    gaussian_kernel,
    kernel_matrix,
    scale_features,
    stacked_kernel_matrix,
)


class TestGaussianKernel:
    """Test the scalar kernel."""

    @pytest.mark.unit
    def test_values(self):
        """Test K(u, u) = 1 and a hand-computed value."""
        assert gaussian_kernel([0.3, 0.7], [0.3, 0.7], 5.0) == 1.0
        assert gaussian_kernel([0.0, 0.0], [1.0, 1.0], 0.5) == pytest.approx(np.exp(-1.0))

    @pytest.mark.unit
    @pytest.mark.parametrize("beta", [0.0, -1.0, np.inf, np.nan])
    def test_invalid_beta(self, beta):
        """Test that beta must be positive and finite."""
        with pytest.raises(ConfigurationError):
            gaussian_kernel([0.0], [1.0], beta)

    @pytest.mark.unit
    def test_length_mismatch(self):
        """Test that arguments must have equal length."""
        with pytest.raises(DimensionError):
            gaussian_kernel([0.0], [1.0, 2.0], 1.0)

    @pytest.mark.unit
    def test_monotone_in_beta_and_distance(self):
        """Test strict decrease in beta and in squared distance, within (0, 1]."""
        betas = [0.1, 0.5, 1.0, 2.0, 5.0]
        offsets = [0.1, 0.3, 0.6, 1.0, 1.5]

        by_beta = [gaussian_kernel([0.2, 0.4], [0.9, 0.1], beta) for beta in betas]
        by_distance = [gaussian_kernel([0.0, 0.0], [d, d], 2.0) for d in offsets]

        for values in (by_beta, by_distance):
            assert np.all(np.diff(values) < 0)
            assert all(0.0 < value <= 1.0 for value in values)


class TestKernelMatrix:
    """Test covariate matrix construction."""

    @pytest.mark.unit
    def test_training_design_is_symmetric_with_unit_diagonal(self, rng):
        """Test the training kernel."""
        points = rng.uniform(size=(2, 8))
        K = kernel_matrix(points, points, 3.0)

        assert K.shape == (8, 8)
        np.testing.assert_allclose(K, K.T, atol=1e-15)
        np.testing.assert_array_equal(np.diag(K), np.ones(8))
        assert np.all((K > 0) & (K <= 1))

    @pytest.mark.unit
    def test_entries_match_scalar_kernel(self, rng):
        """Test entry (r, m) = K(anchor_r, point_m)."""
        anchors = rng.uniform(size=(3, 4))
        points = rng.uniform(size=(3, 5))
        K = kernel_matrix(anchors, points, 2.0)

        assert K.shape == (4, 5)
        assert K[2, 3] == pytest.approx(gaussian_kernel(anchors[:, 2], points[:, 3], 2.0))

    @pytest.mark.unit
    def test_identity_limit(self):
        """Test that a very large beta gives a near-identity design."""
        points = np.linspace(0.0, 1.0, 10)[None, :]
        K = kernel_matrix(points, points, 1e6)

        off_diagonal = K[~np.eye(10, dtype=bool)]
        assert off_diagonal.max() < 1e-6
        np.testing.assert_array_equal(np.diag(K), np.ones(10))

    @pytest.mark.unit
    def test_small_beta_is_nearly_constant(self):
        """Test the small-beta limit on scaled points."""
        points = np.linspace(0.0, 1.0, 5)[None, :]
        K = kernel_matrix(points, points, 1e-6)

        assert K.min() > 1 - 1e-5

    @pytest.mark.unit
    def test_dimension_mismatch(self):
        """Test that anchors and points must share the feature dimension."""
        with pytest.raises(DimensionError):
            kernel_matrix(np.zeros((2, 3)), np.zeros((1, 3)), 1.0)


class TestFeatureScaling:
    """Test scaling of features onto [0, 1]."""

    @pytest.mark.unit
    def test_scale_features(self):
        """Test each feature is mapped onto [0, 1]."""
        features = np.array([[10.0, 20.0, 15.0], [-1.0, 1.0, 0.0]])
        scaled, scaling = scale_features(features)

        np.testing.assert_allclose(scaled, [[0.0, 1.0, 0.5], [0.0, 1.0, 0.5]])
        np.testing.assert_array_equal(scaling.minimum, [10.0, -1.0])
        np.testing.assert_array_equal(scaling.maximum, [20.0, 1.0])
        assert scaling.dim == 2

    @pytest.mark.unit
    def test_constant_feature(self):
        """Test that a constant feature is degenerate."""
        with pytest.raises(DegenerateFeatureError) as exc_info:
            scale_features(np.array([[1.0, 2.0], [3.0, 3.0]]))

        assert exc_info.value.context["feature"] == 1

    @pytest.mark.unit
    def test_new_points_may_leave_unit_interval(self):
        """Test that new points reuse training ranges."""
        scaling = FeatureScaling(np.array([0.0]), np.array([10.0]))

        np.testing.assert_allclose(scaling.apply([[-5.0, 5.0, 20.0]]), [[-0.5, 0.5, 2.0]])
        with pytest.raises(DimensionError):
            scaling.apply(np.zeros((2, 3)))


class TestKernelConfig:
    """Test kernel blocks."""

    @pytest.mark.unit
    def test_covariates_apply_scaling(self, rng):
        """Test new raw points are scaled before evaluating the kernel."""
        raw = rng.uniform(0.0, 50.0, size=(1, 6))
        anchors, scaling = scale_features(raw)
        block = KernelConfig(4.0, anchors, scaling)
        new = np.array([[12.0, 30.0]])

        np.testing.assert_array_equal(block.covariates(), kernel_matrix(anchors, anchors, 4.0))
        np.testing.assert_allclose(
            block.covariates(new), kernel_matrix(anchors, scaling.apply(new), 4.0)
        )

    @pytest.mark.unit
    def test_invalid_beta(self):
        """Test that a block validates beta."""
        with pytest.raises(ConfigurationError):
            KernelConfig(0.0, np.zeros((1, 2)))

    @pytest.mark.unit
    def test_stacked_blocks(self, rng):
        """Test that blocks with their own beta stack row-wise."""
        first = KernelConfig(1.0, rng.uniform(size=(1, 5)))
        second = KernelConfig(50.0, rng.uniform(size=(2, 5)))
        A = stacked_kernel_matrix([first, second])

        assert A.shape == (10, 5)
        np.testing.assert_array_equal(A[:5], first.covariates())
        np.testing.assert_array_equal(A[5:], second.covariates())

    @pytest.mark.unit
    def test_stacked_blocks_with_new_points(self, rng):
        """Test stacked designs for new points."""
        first = KernelConfig(1.0, rng.uniform(size=(1, 5)))
        second = KernelConfig(50.0, rng.uniform(size=(2, 5)))
        A = stacked_kernel_matrix(
            [first, second], [rng.uniform(size=(1, 3)), rng.uniform(size=(2, 3))]
        )

        assert A.shape == (10, 3)

    @pytest.mark.unit
    def test_stacked_block_errors(self, rng):
        """Test stacking errors."""
        block = KernelConfig(1.0, rng.uniform(size=(1, 5)))

        with pytest.raises(ConfigurationError):
            stacked_kernel_matrix([])
        with pytest.raises(DimensionError):
            stacked_kernel_matrix([block, block], [rng.uniform(size=(1, 3))])
        with pytest.raises(DimensionError):
            stacked_kernel_matrix(
                [block, block], [rng.uniform(size=(1, 3)), rng.uniform(size=(1, 4))]
            )
