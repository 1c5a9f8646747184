"""Dense matrix substrate shared by every covnmf module.

Matrices are two-dimensional ``float64`` numpy arrays. ``as_matrix`` is the single
construction point: it copies the input, rejects empty or non-finite data and
returns a read-only array, so values are never mutated after construction.
"""

from typing import TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionError, InvalidValueError

Matrix: TypeAlias = NDArray[np.float64]
Vector: TypeAlias = NDArray[np.float64]

DEFAULT_FLOOR = 1e-16


def as_matrix(values: ArrayLike, name: str = "matrix") -> Matrix:
    """Build a validated, read-only 2-D float64 matrix.

    Args:
        values: Anything numpy can turn into a 2-D array
        name: Label used in error messages

    Returns:
        A read-only copy of ``values``

    Raises:
        DimensionError: If the data is not 2-D or has an empty axis
        InvalidValueError: If any entry is NaN or infinite
    """
    try:
        array = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidValueError(f"{name} is not numeric: {exc}") from exc

    if array.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got {array.ndim}-D")
    if array.shape[0] < 1 or array.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(array)):
        row, col = np.argwhere(~np.isfinite(array))[0]
        raise InvalidValueError(
            f"{name} has a non-finite entry", row=int(row), col=int(col)
        )

    array.flags.writeable = False
    return array


def as_vector(values: ArrayLike, name: str = "vector") -> Vector:
    """Build a validated, read-only 1-D float64 vector."""
    array = np.array(values, dtype=np.float64)
    if array.ndim != 1 or array.size < 1:
        raise DimensionError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(array)):
        raise InvalidValueError(f"{name} has a non-finite entry")
    array.flags.writeable = False
    return array


def require_nonnegative(matrix: NDArray[np.float64], name: str) -> None:
    """Raise ``InvalidValueError`` naming the first negative entry, if any."""
    if np.any(matrix < 0):
        position = tuple(int(i) for i in np.argwhere(matrix < 0)[0])
        raise InvalidValueError(f"{name} must be non-negative", position=position)


def require_same_shape(a: Matrix, b: Matrix) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def hadamard_product(a: Matrix, b: Matrix) -> Matrix:
    """Element-wise product of equal-shape matrices."""
    require_same_shape(a, b)
    return np.multiply(a, b)


def hadamard_division(a: Matrix, b: Matrix, floor: float = DEFAULT_FLOOR) -> Matrix:
    """Element-wise ``a / max(b, floor)``; finite for finite non-negative inputs."""
    require_same_shape(a, b)
    if not floor > 0:
        raise InvalidValueError("division floor must be positive", floor=floor)
    return np.divide(a, np.maximum(b, floor))


def row_sums(a: Matrix) -> Vector:
    """Vector of length ``rows`` holding each row's sum."""
    return np.sum(a, axis=1)


def col_sums(a: Matrix) -> Vector:
    """Vector of length ``cols`` holding each column's sum."""
    return np.sum(a, axis=0)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product with an explicit inner-dimension check."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return np.matmul(a, b)


def transpose(a: Matrix) -> Matrix:
    return np.transpose(a)
