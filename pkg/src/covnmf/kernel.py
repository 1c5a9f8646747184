"""Gaussian-kernel covariate matrices.

Features are stored dim x n, one column per individual, matching the observation
matrix. The covariate of individual n is the column of kernel values between every
anchor and u_n, so a training design is symmetric with a unit diagonal.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.distance import cdist

from .errors import ConfigurationError, DegenerateFeatureError, DimensionError
from .matrix import Matrix, Vector, as_matrix, as_vector


def _check_beta(beta: float) -> None:
    if not (np.isfinite(beta) and beta > 0):
        raise ConfigurationError("kernel bandwidth beta must be positive", beta=beta)


@dataclass(frozen=True)
class FeatureScaling:
    """Per-feature (min, max) ranges that map training features onto [0, 1]."""

    minimum: Vector
    maximum: Vector

    @property
    def dim(self) -> int:
        return int(self.minimum.shape[0])

    def apply(self, points: ArrayLike) -> Matrix:
        """Map points with the stored ranges; new points may fall outside [0, 1]."""
        values = as_matrix(points, "points")
        if values.shape[0] != self.dim:
            raise DimensionError(
                f"points have {values.shape[0]} features, scaling expects {self.dim}"
            )
        span = self.maximum - self.minimum
        return as_matrix((values - self.minimum[:, None]) / span[:, None], "points")


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth and training anchors defining the rows of a kernel design."""

    beta: float
    anchors: Matrix
    scaling: FeatureScaling | None = None

    def __post_init__(self) -> None:
        _check_beta(self.beta)

    def covariates(self, points: ArrayLike | None = None) -> Matrix:
        """Kernel design for ``points`` (raw units) or for the anchors themselves."""
        if points is None:
            return kernel_matrix(self.anchors, self.anchors, self.beta)
        target = self.scaling.apply(points) if self.scaling else as_matrix(points)
        return kernel_matrix(self.anchors, target, self.beta)


def scale_features(u: ArrayLike) -> tuple[Matrix, FeatureScaling]:
    """Affinely map every feature (row) of ``u`` onto [0, 1].

    Returns:
        The scaled features and the ranges needed to map new points identically

    Raises:
        DegenerateFeatureError: If a feature has max equal to min
    """
    features = as_matrix(u, "features")
    minimum = features.min(axis=1)
    maximum = features.max(axis=1)
    constant = np.flatnonzero(maximum <= minimum)
    if constant.size:
        raise DegenerateFeatureError(
            "constant feature cannot be scaled", feature=int(constant[0])
        )
    scaling = FeatureScaling(as_vector(minimum), as_vector(maximum))
    return scaling.apply(features), scaling


def gaussian_kernel(u: ArrayLike, v: ArrayLike, beta: float) -> float:
    """exp(-beta * ||u - v||^2)."""
    _check_beta(beta)
    a = as_vector(u, "u")
    b = as_vector(v, "v")
    if a.shape != b.shape:
        raise DimensionError(f"kernel arguments differ in length: {a.size} vs {b.size}")
    diff = a - b
    return float(np.exp(-beta * np.dot(diff, diff)))


def kernel_matrix(anchors: ArrayLike, points: ArrayLike, beta: float) -> Matrix:
    """Covariate matrix with entry (r, m) = K(anchor_r, point_m).

    Args:
        anchors: dim x N_anchor training features
        points: dim x M features of the individuals to describe
        beta: Positive bandwidth

    Returns:
        N_anchor x M matrix with entries in [0, 1]
    """
    _check_beta(beta)
    left = as_matrix(anchors, "anchors")
    right = as_matrix(points, "points")
    if left.shape[0] != right.shape[0]:
        raise DimensionError(
            f"anchors have {left.shape[0]} features, points have {right.shape[0]}"
        )
    squared = cdist(left.T, right.T, metric="sqeuclidean")
    return as_matrix(np.exp(-beta * squared), "kernel matrix")


def stacked_kernel_matrix(
    blocks: Sequence[KernelConfig], points: Sequence[ArrayLike | None] | None = None
) -> Matrix:
    """Stack independent kernel blocks row-wise into one covariate matrix.

    Each block keeps its own bandwidth and anchors; ``points`` holds one feature
    matrix per block (or ``None`` for the training design).
    """
    if not blocks:
        raise ConfigurationError("at least one kernel block is required")
    targets: Sequence[ArrayLike | None] = points or [None] * len(blocks)
    if len(targets) != len(blocks):
        raise DimensionError(
            f"{len(blocks)} kernel blocks but {len(targets)} point sets"
        )
    designs = [block.covariates(target) for block, target in zip(blocks, targets, strict=True)]
    widths = {design.shape[1] for design in designs}
    if len(widths) != 1:
        raise DimensionError("kernel blocks describe different numbers of individuals")
    return as_matrix(np.vstack(designs), "stacked kernel matrix")
