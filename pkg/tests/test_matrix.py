"""Tests for the dense matrix helpers."""

import numpy as np
import pytest

from covnmf.errors import DimensionError, InvalidValueError
from covnmf.matrix import (
    as_matrix,
    as_vector,
    col_sums,
    hadamard_division,
    hadamard_product,
    matmul,
    require_nonnegative,
    row_sums,
    transpose,
)


class TestConstruction:
    """Test matrix and vector construction."""

    @pytest.mark.unit
    def test_as_matrix_copies_and_freezes(self):
        """Test that the result is a read-only copy."""
        source = np.array([[1.0, 2.0], [3.0, 4.0]])
        matrix = as_matrix(source)
        source[0, 0] = 99.0

        assert matrix[0, 0] == 1.0
        assert matrix.dtype == np.float64
        with pytest.raises(ValueError):
            matrix[0, 0] = 5.0

    @pytest.mark.unit
    @pytest.mark.parametrize("values", [[1.0, 2.0], np.zeros((0, 3)), np.zeros((2, 0))])
    def test_bad_shapes(self, values):
        """Test that non 2-D or empty input is rejected."""
        with pytest.raises(DimensionError):
            as_matrix(values)

    @pytest.mark.unit
    def test_non_finite_entry_reports_position(self):
        """Test that NaN is rejected with its position."""
        with pytest.raises(InvalidValueError) as exc_info:
            as_matrix([[1.0, 2.0], [np.nan, 4.0]], "Y")

        assert exc_info.value.context == {"row": 1, "col": 0}
        assert "Y" in str(exc_info.value)

    @pytest.mark.unit
    def test_non_numeric(self):
        """Test that strings are rejected."""
        with pytest.raises(InvalidValueError):
            as_matrix([["a", "b"]])

    @pytest.mark.unit
    def test_as_vector(self):
        """Test vector construction."""
        assert as_vector([1, 2, 3]).shape == (3,)
        with pytest.raises(DimensionError):
            as_vector([[1.0]])
        with pytest.raises(InvalidValueError):
            as_vector([np.inf])


class TestElementwise:
    """Test the element-wise operations."""

    @pytest.mark.unit
    def test_hadamard_product(self):
        """Test the element-wise product."""
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(hadamard_product(a, a), [[1.0, 4.0], [9.0, 16.0]])

    @pytest.mark.unit
    def test_hadamard_product_algebra(self, rng):
        """Test commutativity and associativity."""
        a, b, c = (rng.uniform(0.1, 10.0, size=(4, 3)) for _ in range(3))

        np.testing.assert_allclose(hadamard_product(a, b), hadamard_product(b, a), rtol=1e-12)
        np.testing.assert_allclose(
            hadamard_product(hadamard_product(a, b), c),
            hadamard_product(a, hadamard_product(b, c)),
            rtol=1e-12,
        )

    @pytest.mark.unit
    def test_hadamard_division_floor(self):
        """Test that zero denominators are floored."""
        result = hadamard_division(np.array([[1.0, 6.0]]), np.array([[0.0, 3.0]]), floor=1e-16)

        assert result[0, 0] == pytest.approx(1e16)
        assert result[0, 1] == 2.0
        assert np.all(np.isfinite(result))

    @pytest.mark.unit
    def test_hadamard_division_rejects_bad_floor(self):
        """Test that the floor must be positive."""
        with pytest.raises(InvalidValueError):
            hadamard_division(np.ones((1, 1)), np.ones((1, 1)), floor=0.0)

    @pytest.mark.unit
    def test_shape_mismatch(self):
        """Test that element-wise operations require equal shapes."""
        with pytest.raises(DimensionError):
            hadamard_product(np.ones((2, 2)), np.ones((2, 3)))
        with pytest.raises(DimensionError):
            hadamard_division(np.ones((2, 2)), np.ones((3, 2)))


class TestReductions:
    """Test sums, products and transposes."""

    @pytest.mark.unit
    def test_sums(self):
        """Test row and column sums."""
        a = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])

        np.testing.assert_array_equal(row_sums(a), [6.0, 15.0])
        np.testing.assert_array_equal(col_sums(a), [5.0, 7.0, 9.0])

    @pytest.mark.unit
    def test_sums_agree_with_total(self, rng):
        """Test both reductions add up to the grand total."""
        a = rng.uniform(0.0, 5.0, size=(6, 9))

        assert row_sums(a).sum() == pytest.approx(a.sum(), rel=1e-12)
        assert col_sums(a).sum() == pytest.approx(a.sum(), rel=1e-12)

    @pytest.mark.unit
    def test_matmul(self):
        """Test the checked matrix product."""
        a = np.array([[1.0, 2.0]])
        b = np.array([[3.0], [4.0]])

        np.testing.assert_array_equal(matmul(a, b), [[11.0]])
        with pytest.raises(DimensionError):
            matmul(a, a)

    @pytest.mark.unit
    def test_transpose(self):
        """Test transposition."""
        assert transpose(np.ones((2, 3))).shape == (3, 2)

    @pytest.mark.unit
    def test_require_nonnegative(self):
        """Test that the first negative entry is reported."""
        require_nonnegative(np.zeros((2, 2)), "A")
        with pytest.raises(InvalidValueError) as exc_info:
            require_nonnegative(np.array([[0.0, 1.0], [2.0, -1.0]]), "A")

        assert exc_info.value.context["position"] == (1, 1)
