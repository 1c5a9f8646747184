"""K-fold cross-validation of the kernel bandwidth, rank and penalty.

Folds split individuals (columns of Y). For each grid cell and fold the model is
refit on the training columns with anchors and feature ranges taken from those
columns only, and scored by the squared Euclidean error of predicting the held-out
columns through their kernel covariates.
"""

import itertools
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd
import structlog
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, PositiveInt
from sklearn.model_selection import KFold

from . import nmf
from .config import FitConfig
from .errors import ConfigurationError, CovNMFError, DimensionError
from .kernel import kernel_matrix, scale_features
from .matrix import Matrix, Vector, as_matrix, as_vector

logger = structlog.get_logger(__name__)


class CvPlan(BaseModel):
    """Grid and fold layout of a cross-validation run.

    ``q_grid`` and ``gamma_grid`` default to the rank and penalty of the fit
    configuration; ``fold_assignment`` overrides the seeded split.
    """

    folds: int = Field(default=10, ge=2, description="Number of folds")
    fold_assignment: list[int] | None = Field(
        default=None, description="Fold label per individual"
    )
    beta_grid: list[PositiveFloat] = Field(min_length=1, description="Kernel bandwidths")
    q_grid: list[PositiveInt] | None = Field(default=None, min_length=1)
    gamma_grid: list[NonNegativeFloat] | None = Field(default=None, min_length=1)
    seed: int = Field(default=1, ge=0, description="Fold shuffling seed")
    scale_features: bool = Field(
        default=False, description="Map training features onto [0, 1] per fold"
    )

    model_config = ConfigDict(frozen=True)


@dataclass(frozen=True, order=True)
class CvConfig:
    """One grid cell; ordering is the tie-break order (beta, rank, gamma)."""

    beta: float
    rank: int
    gamma: float


@dataclass(frozen=True)
class CvResult:
    configs: tuple[CvConfig, ...]
    fold_errors: Matrix
    mean_errors: Vector
    best: CvConfig
    fold_assignment: NDArray[np.intp]

    @property
    def best_error(self) -> float:
        return float(self.mean_errors[self.configs.index(self.best)])

    def to_frame(self) -> pd.DataFrame:
        """One row per configuration: beta, rank, gamma, mean_error, fold_0.. fold_k."""
        frame = pd.DataFrame(
            {
                "beta": [c.beta for c in self.configs],
                "rank": [c.rank for c in self.configs],
                "gamma": [c.gamma for c in self.configs],
                "mean_error": self.mean_errors,
            }
        )
        folds = pd.DataFrame(
            self.fold_errors,
            columns=[f"fold_{k}" for k in range(self.fold_errors.shape[1])],
        )
        return pd.concat([frame, folds], axis=1)


@dataclass(frozen=True)
class ObjectivePath:
    """In-sample objective and r-squared along a bandwidth grid."""

    betas: Vector
    objectives: Vector
    r_squared: Vector
    baseline_objective: float
    baseline_r_squared: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"beta": self.betas, "objective": self.objectives, "r_squared": self.r_squared}
        )


def make_folds(n: int, folds: int, seed: int) -> NDArray[np.intp]:
    """Seeded assignment of ``n`` individuals to ``folds`` near-equal folds.

    Returns:
        Fold label (0 .. folds - 1) per individual; fold sizes differ by at most 1
    """
    if folds < 2:
        raise ConfigurationError("cross-validation needs at least 2 folds", folds=folds)
    if folds > n:
        raise ConfigurationError(
            "more folds than individuals", folds=folds, individuals=n
        )
    labels = np.empty(n, dtype=np.intp)
    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    for label, (_, test) in enumerate(splitter.split(np.arange(n))):
        labels[test] = label
    return labels


def _resolve_folds(plan: CvPlan, n: int) -> NDArray[np.intp]:
    if plan.fold_assignment is None:
        return make_folds(n, plan.folds, plan.seed)
    labels = np.asarray(plan.fold_assignment, dtype=np.intp)
    if labels.shape != (n,):
        raise ConfigurationError(
            "fold assignment must label every individual",
            labels=labels.size,
            individuals=n,
        )
    present = np.unique(labels)
    if present.size < 2 or not np.array_equal(present, np.arange(present.size)):
        raise ConfigurationError("fold labels must be 0 .. k-1 with k >= 2 and no empty fold")
    return labels


def _grid(plan: CvPlan, fit_cfg: FitConfig) -> tuple[CvConfig, ...]:
    ranks = plan.q_grid or [fit_cfg.rank]
    gammas = plan.gamma_grid if plan.gamma_grid is not None else [fit_cfg.gamma]
    return tuple(
        CvConfig(beta=float(b), rank=int(q), gamma=float(g))
        for b, q, g in itertools.product(plan.beta_grid, ranks, gammas)
    )


def _fold_error(
    Y: Matrix,
    U: Matrix,
    train: NDArray[np.bool_],
    cell: CvConfig,
    fit_cfg: FitConfig,
    scale: bool,
) -> float:
    train_features = U[:, train]
    test_features = U[:, ~train]
    if scale:
        anchors, scaling = scale_features(train_features)
        targets = scaling.apply(test_features)
    else:
        anchors, targets = train_features, test_features

    config = fit_cfg.model_copy(update={"rank": cell.rank, "gamma": cell.gamma})
    result = nmf.fit(Y[:, train], kernel_matrix(anchors, anchors, cell.beta), config)
    predicted = nmf.predict(result.model, kernel_matrix(anchors, targets, cell.beta))
    residual = Y[:, ~train] - predicted
    return float(np.sum(residual * residual))


def cross_validate(
    Y: ArrayLike, U: ArrayLike, plan: CvPlan, fit_cfg: FitConfig
) -> CvResult:
    """Score every (beta, rank, gamma) cell by mean held-out squared error.

    Raises:
        CovNMFError: Any fit error, with ``beta``, ``rank``, ``gamma`` and ``fold``
            added to its context
    """
    observed = as_matrix(Y, "Y")
    features = as_matrix(U, "features")
    if features.shape[1] != observed.shape[1]:
        raise DimensionError(
            f"Y has {observed.shape[1]} individuals but features describe {features.shape[1]}"
        )
    labels = _resolve_folds(plan, observed.shape[1])
    n_folds = int(labels.max()) + 1
    configs = _grid(plan, fit_cfg)

    errors = np.zeros((len(configs), n_folds))
    for i, cell in enumerate(configs):
        for fold in range(n_folds):
            try:
                errors[i, fold] = _fold_error(
                    observed, features, labels != fold, cell, fit_cfg, plan.scale_features
                )
            except CovNMFError as exc:
                exc.context.update(
                    beta=cell.beta, rank=cell.rank, gamma=cell.gamma, fold=fold
                )
                raise
        logger.debug(
            "cv_cell_scored",
            beta=cell.beta,
            rank=cell.rank,
            gamma=cell.gamma,
            mean_error=float(errors[i].mean()),
        )

    means = errors.mean(axis=1)
    best_index = min(range(len(configs)), key=lambda i: (means[i], configs[i]))
    best = configs[best_index]
    logger.info(
        "cv_finished",
        beta=best.beta,
        rank=best.rank,
        gamma=best.gamma,
        mean_error=float(means[best_index]),
        folds=n_folds,
    )
    return CvResult(
        configs=configs,
        fold_errors=as_matrix(errors, "fold errors"),
        mean_errors=as_vector(means, "mean errors"),
        best=best,
        fold_assignment=labels,
    )


def objective_path(
    Y: ArrayLike,
    U: ArrayLike,
    betas: Sequence[float],
    fit_cfg: FitConfig,
    scale: bool = False,
) -> ObjectivePath:
    """Fit on all individuals for each beta, alongside the covariate-free baseline.

    As beta grows the kernel design approaches the identity and the objective
    approaches the baseline value.
    """
    observed = as_matrix(Y, "Y")
    features = as_matrix(U, "features")
    if features.shape[1] != observed.shape[1]:
        raise DimensionError(
            f"Y has {observed.shape[1]} individuals but features describe {features.shape[1]}"
        )
    anchors = scale_features(features)[0] if scale else features
    grid = as_vector(betas, "betas")

    objectives, fits = [], []
    for beta in grid:
        result = nmf.fit(observed, kernel_matrix(anchors, anchors, float(beta)), fit_cfg)
        objectives.append(result.objective)
        fits.append(result.r_squared)

    baseline = nmf.fit(observed, np.eye(observed.shape[1]), fit_cfg)
    return ObjectivePath(
        betas=grid,
        objectives=np.asarray(objectives),
        r_squared=np.asarray(fits),
        baseline_objective=baseline.objective,
        baseline_r_squared=baseline.r_squared,
    )
