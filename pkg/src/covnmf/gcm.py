"""Growth Curve Model estimation for comparison with NMF.

The Growth Curve Model shares the mean structure X Theta A with NMF with
covariates but treats X as known and gives every column of Y the covariance Sigma.
Its maximum likelihood estimators have a closed form; when X and A are
non-negative, Theta can alternatively be optimized by the NMF parameter update,
and with P = 1, X = 1 that update is a non-negative multiple regression.
"""

from dataclasses import dataclass

import numpy as np
import structlog
from numpy.typing import ArrayLike
from scipy import linalg

from . import nmf
from .errors import (
    DegenerateInputError,
    DimensionError,
    InsufficientDataError,
    SingularMatrixError,
)
from .matrix import DEFAULT_FLOOR, Matrix, Vector, as_matrix, as_vector, require_nonnegative

logger = structlog.get_logger(__name__)

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class GcmEstimate:
    """Closed-form estimates together with the intermediate scatter matrix S."""

    theta_hat: Matrix
    sigma_hat: Matrix
    S: Matrix


def _guarded_solve(
    matrix: Matrix, rhs: Matrix, factor: str, condition_limit: float
) -> Matrix:
    condition = float(np.linalg.cond(matrix))
    if not np.isfinite(condition) or condition > condition_limit:
        raise SingularMatrixError(
            f"{factor} is singular or ill-conditioned",
            factor=factor,
            condition=condition,
        )
    return linalg.lu_solve(linalg.lu_factor(matrix), rhs)


def _symmetrize(matrix: Matrix) -> Matrix:
    return (matrix + matrix.T) / 2.0


def gcm_mle(
    Y: ArrayLike,
    X: ArrayLike,
    A: ArrayLike,
    condition_limit: float = CONDITION_LIMIT,
) -> GcmEstimate:
    """Maximum likelihood estimators of Theta and Sigma.

    S = Y (I - A'(AA')^-1 A) Y' / (N - R)
    Theta = (X'S^-1 X)^-1 X'S^-1 Y A'(AA')^-1
    Sigma = (Y - X Theta A)(Y - X Theta A)' / N

    Raises:
        InsufficientDataError: If N <= R
        SingularMatrixError: If AA', S or X'S^-1 X cannot be inverted safely
    """
    observed = as_matrix(Y, "Y")
    basis = as_matrix(X, "X")
    covariates = as_matrix(A, "A")
    n_variables, n_individuals = observed.shape
    n_covariates = covariates.shape[0]
    if basis.shape[0] != n_variables or covariates.shape[1] != n_individuals:
        raise DimensionError(
            f"Y {observed.shape}, X {basis.shape} and A {covariates.shape} do not conform"
        )
    if n_individuals <= n_covariates:
        raise InsufficientDataError(
            "growth curve estimation needs more individuals than covariates",
            individuals=n_individuals,
            covariates=n_covariates,
        )

    gram = covariates @ covariates.T
    hat = covariates.T @ _guarded_solve(gram, covariates, "AA'", condition_limit)
    residual_maker = np.eye(n_individuals) - hat
    S = _symmetrize(observed @ residual_maker @ observed.T / (n_individuals - n_covariates))

    s_inv_x = _guarded_solve(S, basis, "S", condition_limit)
    weighted = basis.T @ s_inv_x
    projected = s_inv_x.T @ observed @ covariates.T
    left = _guarded_solve(weighted, projected, "X'S^-1X", condition_limit)
    # right-multiplication by (AA')^-1, using symmetry of AA'
    theta_hat = _guarded_solve(gram, left.T, "AA'", condition_limit).T

    residual = observed - basis @ theta_hat @ covariates
    sigma_hat = _symmetrize(residual @ residual.T / n_individuals)
    return GcmEstimate(
        theta_hat=as_matrix(theta_hat, "Theta_hat"),
        sigma_hat=as_matrix(sigma_hat, "Sigma_hat"),
        S=as_matrix(S, "S"),
    )


def gcm_r_squared(Y: ArrayLike, X: ArrayLike, estimate: GcmEstimate, A: ArrayLike) -> float:
    """Coefficient of determination of the fitted mean X Theta_hat A."""
    basis = as_matrix(X, "X")
    fitted = basis @ estimate.theta_hat @ as_matrix(A, "A")
    return nmf.r_squared(Y, fitted)


def polynomial_basis(points: ArrayLike, degree: int = 1) -> Matrix:
    """Within-individual design with columns 1, t, ..., t^degree."""
    times = as_vector(points, "points")
    if degree < 0:
        raise DimensionError("polynomial degree must be non-negative")
    return as_matrix(np.vander(times, degree + 1, increasing=True), "polynomial basis")


def gcm_theta_by_nmf_updates(
    Y: ArrayLike,
    X: ArrayLike,
    A: ArrayLike,
    seed: int = 1,
    tol: float = 1e-12,
    max_iter: int = 50000,
    floor: float = DEFAULT_FLOOR,
) -> Matrix:
    """Non-negative Theta for known X and A by iterating the Euclidean update (gamma = 0).

    Stops when the relative change of the squared residual falls below ``tol``
    or the residual vanishes to rounding level.
    """
    observed = as_matrix(Y, "Y")
    basis = as_matrix(X, "X")
    covariates = as_matrix(A, "A")
    require_nonnegative(observed, "Y")
    require_nonnegative(basis, "X")
    require_nonnegative(covariates, "A")
    if basis.shape[0] != observed.shape[0] or covariates.shape[1] != observed.shape[1]:
        raise DimensionError(
            f"Y {observed.shape}, X {basis.shape} and A {covariates.shape} do not conform"
        )
    if not np.any(observed > 0):
        raise DegenerateInputError("Y is identically zero")

    rng = nmf.restart_rng(seed, 0)
    theta = rng.uniform(nmf.INIT_LOW, nmf.INIT_HIGH, size=(basis.shape[1], covariates.shape[0]))
    Yhat = basis @ theta @ covariates
    scale = float(np.sum(observed * observed))
    current = float(np.sum((observed - Yhat) ** 2))

    for iteration in range(1, max_iter + 1):
        previous = current
        theta = nmf.update_theta_euclidean(theta, basis, observed, Yhat, covariates, 0.0, floor)
        Yhat = basis @ theta @ covariates
        current = float(np.sum((observed - Yhat) ** 2))
        if current <= 1e-28 * scale or nmf.has_converged(previous, current, tol):
            logger.debug("gcm_updates_converged", iterations=iteration, objective=current)
            break
    else:
        logger.warning("gcm_updates_iteration_cap", max_iter=max_iter, objective=current)

    return as_matrix(theta, "Theta")


def nonneg_regression(
    y: ArrayLike,
    A: ArrayLike,
    seed: int = 1,
    tol: float = 1e-12,
    max_iter: int = 50000,
) -> Vector:
    """Non-negative coefficients theta with y ~ A' theta.

    theta <- theta * (A y / A yhat), yhat <- A' theta: the P = 1, X = 1 case of the
    parameter update.
    """
    response = as_vector(y, "y")
    covariates = as_matrix(A, "A")
    if covariates.shape[1] != response.shape[0]:
        raise DimensionError(
            f"y has length {response.shape[0]} but A describes {covariates.shape[1]}"
        )
    require_nonnegative(covariates, "A")
    empty = np.flatnonzero(~np.any(covariates > 0, axis=1))
    if empty.size:
        raise DegenerateInputError("covariate row is identically zero", row=int(empty[0]))
    theta = gcm_theta_by_nmf_updates(
        response[None, :], np.ones((1, 1)), covariates, seed=seed, tol=tol, max_iter=max_iter
    )
    return as_vector(theta[0], "theta")
