"""Non-negative matrix factorization with known covariates, Y ~ X Theta A.

X (P x Q) is the basis with unit column sums, Theta (Q x R) the parameter matrix
and A (R x N) the known non-negative covariates. Both factors are fitted by
multiplicative updates under the penalized squared Euclidean distance or the
penalized KL-type divergence; A = I recovers ordinary NMF with B = Theta.
"""

from dataclasses import dataclass, field

import numpy as np
import structlog
from numpy.typing import ArrayLike, NDArray
from scipy.special import rel_entr
from sklearn.cluster import KMeans

from .config import FitConfig, Initialization, Loss, Normalization
from .errors import (
    ConfigurationError,
    DegenerateBasisError,
    DegenerateCoefficientError,
    DegenerateInputError,
    DimensionError,
    UndefinedVarianceError,
)
from .matrix import (
    DEFAULT_FLOOR,
    Matrix,
    Vector,
    as_matrix,
    col_sums,
    hadamard_division,
    hadamard_product,
    require_nonnegative,
    row_sums,
)

logger = structlog.get_logger(__name__)

INIT_LOW = 0.1
INIT_HIGH = 1.1


@dataclass(frozen=True)
class FactorModel:
    """Fitted factors; ``B`` and ``Yhat`` are recomputed on every access."""

    X: Matrix
    theta: Matrix
    A: Matrix

    def __post_init__(self) -> None:
        if self.X.shape[1] != self.theta.shape[0]:
            raise DimensionError(
                f"X has {self.X.shape[1]} columns but Theta has {self.theta.shape[0]} rows"
            )
        if self.theta.shape[1] != self.A.shape[0]:
            raise DimensionError(
                f"Theta has {self.theta.shape[1]} columns but A has {self.A.shape[0]} rows"
            )

    @property
    def rank(self) -> int:
        return int(self.X.shape[1])

    @property
    def B(self) -> Matrix:
        return self.theta @ self.A

    @property
    def Yhat(self) -> Matrix:
        return self.X @ (self.theta @ self.A)


@dataclass(frozen=True)
class FitResult:
    """Outcome of ``fit``: the winning restart and its optimization history.

    ``objective_trace`` holds the initial objective followed by one value per
    half-step (basis update, then parameter update).
    """

    model: FactorModel
    objective_trace: Vector
    iterations: int
    converged: bool
    r_squared: float
    restart_index: int
    restart_objectives: tuple[float, ...] = field(default=())

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


# Objectives


def _check_model_shapes(Y: Matrix, model: FactorModel) -> None:
    expected = (model.X.shape[0], model.A.shape[1])
    if Y.shape != expected:
        raise DimensionError(f"Y has shape {Y.shape}, model predicts {expected}")


def _euclidean(Y: Matrix, Yhat: Matrix, theta: Matrix, gamma: float) -> float:
    residual = Y - Yhat
    return float(np.sum(residual * residual) + gamma * np.sum(theta * theta))


def _kl(
    Y: Matrix, Yhat: Matrix, theta: Matrix, gamma: float, floor: float = DEFAULT_FLOOR
) -> float:
    # rel_entr gives 0 for y == 0, so zero observations contribute yhat only
    divergence = rel_entr(Y, np.maximum(Yhat, floor)) - Y + Yhat
    return float(np.sum(divergence) + gamma * np.sum(theta * theta))


def objective_euclidean(Y: ArrayLike, model: FactorModel, gamma: float) -> float:
    """tr (Y - Yhat)'(Y - Yhat) + gamma tr Theta'Theta."""
    observed = as_matrix(Y, "Y")
    _check_model_shapes(observed, model)
    return _euclidean(observed, model.Yhat, model.theta, gamma)


def objective_kl(Y: ArrayLike, model: FactorModel, gamma: float) -> float:
    """sum(y log(y / yhat) - y + yhat) + gamma sum(Theta^2), with 0 log 0 = 0."""
    observed = as_matrix(Y, "Y")
    _check_model_shapes(observed, model)
    return _kl(observed, model.Yhat, model.theta, gamma)


def objective(Y: ArrayLike, model: FactorModel, gamma: float, loss: Loss) -> float:
    """Dispatch to the objective selected by ``loss``."""
    if Loss(loss) is Loss.KL:
        return objective_kl(Y, model, gamma)
    return objective_euclidean(Y, model, gamma)


# Multiplicative updates


def update_basis_euclidean(
    X: Matrix, Y: Matrix, Yhat: Matrix, B: Matrix, floor: float = DEFAULT_FLOOR
) -> Matrix:
    """X <- X * (Y B' / Yhat B')."""
    return hadamard_product(X, hadamard_division(Y @ B.T, Yhat @ B.T, floor))


def update_theta_euclidean(
    theta: Matrix,
    X: Matrix,
    Y: Matrix,
    Yhat: Matrix,
    A: Matrix,
    gamma: float,
    floor: float = DEFAULT_FLOOR,
) -> Matrix:
    """Theta <- Theta * (X'Y A' / (X'Yhat A' + gamma Theta))."""
    numerator = X.T @ Y @ A.T
    denominator = X.T @ Yhat @ A.T + gamma * theta
    return hadamard_product(theta, hadamard_division(numerator, denominator, floor))


def update_basis_kl(
    X: Matrix, Y: Matrix, Yhat: Matrix, B: Matrix, floor: float = DEFAULT_FLOOR
) -> Matrix:
    """X <- X * ((Y / Yhat) B') / (1_P s_r(B)')."""
    ratio = hadamard_division(Y, Yhat, floor)
    numerator = ratio @ B.T
    denominator = np.outer(np.ones(X.shape[0]), row_sums(B))
    return hadamard_product(X, hadamard_division(numerator, denominator, floor))


def update_theta_kl(
    theta: Matrix,
    X: Matrix,
    Y: Matrix,
    Yhat: Matrix,
    A: Matrix,
    gamma: float,
    floor: float = DEFAULT_FLOOR,
) -> Matrix:
    """Exact minimizer of the majorizing surrogate for the penalized KL objective.

    With c = s_c(X)' s_r(A)' and g = Theta * (X'(Y / Yhat) A') each entry solves
    2 gamma t^2 + c t - g = 0, i.e. t = 2g / (c + sqrt(c^2 + 8 gamma g)). For
    gamma = 0 this is Theta * (X'(Y / Yhat) A') / (s_c(X)' s_r(A)').
    """
    ratio = hadamard_division(Y, Yhat, floor)
    gain = hadamard_product(theta, X.T @ ratio @ A.T)
    scale = np.outer(col_sums(X), row_sums(A))
    denominator = scale + np.sqrt(scale * scale + 8.0 * gamma * gain)
    return hadamard_division(2.0 * gain, denominator, floor)


def normalize_basis(
    X: Matrix, theta: Matrix, iteration: int = 0
) -> tuple[Matrix, Matrix]:
    """Divide every column of X by its sum; Theta is returned unchanged.

    Raises:
        DegenerateBasisError: If a column of X sums to zero
    """
    sums = col_sums(X)
    zero = np.flatnonzero(sums <= 0)
    if zero.size:
        raise DegenerateBasisError(
            "basis column collapsed to zero",
            column=int(zero[0]),
            iteration=iteration,
        )
    return X / sums, theta


def _normalize_preserving_fit(
    X: Matrix, theta: Matrix, iteration: int
) -> tuple[Matrix, Matrix]:
    # Theta rows absorb the removed column sums so X Theta A is unchanged.
    normalized, _ = normalize_basis(X, theta, iteration)
    return normalized, theta * col_sums(X)[:, None]


# Fitting


def has_converged(previous: float, current: float, tol: float) -> bool:
    """Relative objective change below ``tol``."""
    return abs(current - previous) / max(previous, 1e-30) < tol


def initialize_factors(
    n_variables: int, rank: int, n_covariates: int, rng: np.random.Generator
) -> tuple[Matrix, Matrix]:
    """Uniform(0.1, 1.1) entries for X and Theta, X column-normalized."""
    X = rng.uniform(INIT_LOW, INIT_HIGH, size=(n_variables, rank))
    theta = rng.uniform(INIT_LOW, INIT_HIGH, size=(rank, n_covariates))
    return normalize_basis(X, theta)


def initialize_kmeans(
    Y: Matrix, rank: int, n_covariates: int, rng: np.random.Generator
) -> tuple[Matrix, Matrix]:
    """Basis from k-means centers of the columns of Y, Theta all ones.

    Raises:
        DegenerateBasisError: If a center is identically zero
    """
    clustering = KMeans(
        n_clusters=rank,
        n_init=10,
        random_state=int(rng.integers(0, 2**31 - 1)),
    ).fit(Y.T)
    X = np.asarray(clustering.cluster_centers_, dtype=np.float64).T
    return normalize_basis(X, np.ones((rank, n_covariates)))


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    """Independent generator for one restart, reproducible from (seed, restart)."""
    return np.random.default_rng([seed, restart])


@dataclass
class _Run:
    X: Matrix
    theta: Matrix
    trace: list[float]
    iterations: int
    converged: bool


def _run_restart(
    Y: Matrix, A: Matrix, config: FitConfig, rng: np.random.Generator
) -> _Run:
    if config.loss is Loss.KL:
        update_basis, update_theta = update_basis_kl, update_theta_kl

        def score(Yhat: Matrix, theta: Matrix) -> float:
            return _kl(Y, Yhat, theta, config.gamma, config.floor)
    else:
        update_basis, update_theta = update_basis_euclidean, update_theta_euclidean

        def score(Yhat: Matrix, theta: Matrix) -> float:
            return _euclidean(Y, Yhat, theta, config.gamma)

    literal = config.normalization is Normalization.LITERAL
    normalize = normalize_basis if literal else _normalize_preserving_fit

    if config.init is Initialization.KMEANS:
        X, theta = initialize_kmeans(Y, config.rank, A.shape[0], rng)
    else:
        X, theta = initialize_factors(Y.shape[0], config.rank, A.shape[0], rng)
    Yhat = X @ (theta @ A)
    current = score(Yhat, theta)
    trace = [current]
    converged = False
    iteration = 0

    for iteration in range(1, config.max_iter + 1):
        previous = current

        B = theta @ A
        X_next = update_basis(X, Y, Yhat, B, config.floor)
        X_next, theta_next = normalize(X_next, theta, iteration)
        Yhat_next = X_next @ (theta_next @ A)
        candidate = score(Yhat_next, theta_next)
        if literal or candidate <= current:
            X, theta, Yhat, current = X_next, theta_next, Yhat_next, candidate
        else:
            # only reachable through the penalty term when gamma > 0
            logger.debug(
                "basis_step_rejected",
                iteration=iteration,
                objective=current,
                candidate=candidate,
            )
        trace.append(current)

        theta = update_theta(theta, X, Y, Yhat, A, config.gamma, config.floor)
        Yhat = X @ (theta @ A)
        current = score(Yhat, theta)
        trace.append(current)

        if has_converged(previous, current, config.tol):
            converged = True
            break

    return _Run(X, theta, trace, iteration, converged)


def _validate_inputs(Y: Matrix, A: Matrix, config: FitConfig) -> None:
    require_nonnegative(Y, "Y")
    require_nonnegative(A, "A")
    if Y.shape[1] != A.shape[1]:
        raise DimensionError(
            f"Y has {Y.shape[1]} individuals but A describes {A.shape[1]}"
        )
    if not np.any(Y > 0):
        raise DegenerateInputError("Y is identically zero")
    if config.rank > min(Y.shape):
        raise ConfigurationError(
            f"rank must not exceed min(P, N) = {min(Y.shape)}", rank=config.rank
        )


def canonical_order(X: Matrix, theta: Matrix, A: Matrix) -> tuple[Matrix, Matrix]:
    """Sort bases by decreasing coefficient row sum (stable for ties)."""
    order = np.argsort(-row_sums(theta @ A), kind="stable")
    return X[:, order], theta[order, :]


def fit(Y: ArrayLike, A: ArrayLike, config: FitConfig) -> FitResult:
    """Fit X and Theta to Y given covariates A.

    Runs ``config.restarts`` seeded restarts, each alternating the basis update
    (with column normalization) and the parameter update until the relative
    objective change drops below ``config.tol``, and keeps the restart with the
    lowest final objective (lowest index on ties).

    By default normalization rescales Theta so the fit is unchanged and the trace
    never increases. ``Normalization.LITERAL`` leaves Theta as it is after the
    column division; that loop is not monotone and, with
    ``Initialization.KMEANS``, follows the k-means-started literal scheme.
    """
    observed = as_matrix(Y, "Y")
    covariates = as_matrix(A, "A")
    _validate_inputs(observed, covariates, config)

    runs: list[_Run] = []
    for restart in range(config.restarts):
        run = _run_restart(observed, covariates, config, restart_rng(config.seed, restart))
        logger.debug(
            "restart_finished",
            restart=restart,
            objective=run.trace[-1],
            iterations=run.iterations,
            converged=run.converged,
        )
        runs.append(run)

    finals = tuple(run.trace[-1] for run in runs)
    best = min(range(len(runs)), key=lambda i: (finals[i], i))
    winner = runs[best]

    X, theta = canonical_order(winner.X, winner.theta, covariates)
    model = FactorModel(as_matrix(X, "X"), as_matrix(theta, "Theta"), covariates)
    result = FitResult(
        model=model,
        objective_trace=np.asarray(winner.trace),
        iterations=winner.iterations,
        converged=winner.converged,
        r_squared=_r_squared_or_nan(observed, model.Yhat),
        restart_index=best,
        restart_objectives=finals,
    )
    logger.info(
        "fit_finished",
        loss=config.loss.value,
        rank=config.rank,
        init=config.init.value,
        normalization=config.normalization.value,
        restart=best,
        objective=result.objective,
        iterations=result.iterations,
        converged=result.converged,
        r_squared=result.r_squared,
    )
    return result


def _r_squared_or_nan(Y: Matrix, Yhat: Matrix) -> float:
    try:
        return r_squared(Y, Yhat)
    except UndefinedVarianceError:
        logger.warning("r_squared_undefined", reason="constant observations")
        return float("nan")


# Derived quantities


def predict(model: FactorModel, a_new: ArrayLike) -> Matrix | Vector:
    """Predicted observations X Theta a for a covariate vector or R x M matrix."""
    covariates = np.asarray(a_new, dtype=np.float64)
    if covariates.ndim not in (1, 2) or covariates.shape[0] != model.theta.shape[1]:
        raise DimensionError(
            f"covariates have leading size {covariates.shape[0]}, "
            f"model expects {model.theta.shape[1]}"
        )
    require_nonnegative(covariates, "covariates")
    return model.X @ (model.theta @ covariates)


def membership_probabilities(B: ArrayLike) -> Matrix:
    """Column-normalized coefficients b_qn / sum_q b_qn (soft-clustering shares)."""
    coefficients = as_matrix(B, "B")
    require_nonnegative(coefficients, "B")
    totals = col_sums(coefficients)
    zero = np.flatnonzero(totals <= 0)
    if zero.size:
        raise DegenerateCoefficientError(
            "individual has an all-zero coefficient vector", individual=int(zero[0])
        )
    return coefficients / totals


def hard_assignments(probabilities: ArrayLike) -> NDArray[np.intp]:
    """Index of the most probable basis per individual (first on ties)."""
    return np.argmax(as_matrix(probabilities, "probabilities"), axis=0)


def basis_contributions(X: ArrayLike) -> Matrix:
    """Row-normalized basis: each variable's share across bases."""
    basis = as_matrix(X, "X")
    totals = row_sums(basis)
    return np.divide(
        basis,
        totals[:, None],
        out=np.zeros_like(basis),
        where=totals[:, None] > 0,
    )


def r_squared(Y: ArrayLike, Yhat: ArrayLike) -> float:
    """1 - sum (y - yhat)^2 / sum (y - grand mean)^2 over all entries."""
    observed = as_matrix(Y, "Y")
    fitted = as_matrix(Yhat, "Yhat")
    if observed.shape != fitted.shape:
        raise DimensionError(f"shape mismatch: {observed.shape} vs {fitted.shape}")
    centered = observed - observed.mean()
    total = float(np.sum(centered * centered))
    if total <= 0:
        raise UndefinedVarianceError("Y is constant, r-squared is undefined")
    residual = observed - fitted
    return 1.0 - float(np.sum(residual * residual)) / total
