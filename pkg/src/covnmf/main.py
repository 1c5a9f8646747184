"""Command-line entry point for covnmf.

Subcommands:
    fit          factorize Y with identity, explicit or Gaussian-kernel covariates
    cv           cross-validate the kernel bandwidth (and optionally rank and penalty)
    predict      predict observations and memberships for new points from a saved fit
    gcm-compare  compare NMF parameters with the growth curve closed form
    cluster      soft and hard cluster tables from a saved fit
"""

import argparse
import math
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ValidationError

from . import __version__, cv, gcm, nmf
from .config import (
    CovariateMode,
    CovNMFSettings,
    FitConfig,
    Initialization,
    LogFormat,
    LogLevel,
    Loss,
    Normalization,
    get_settings,
)
from .errors import ConfigurationError, ConvergenceError, CovNMFError
from .io import (
    DatasetBundle,
    LabeledMatrix,
    ModelBundle,
    Orientation,
    align_columns,
    align_rows,
    ingest_csv,
    load_model_bundle,
    min_shift,
    require_nonnegative_cells,
    save_model_bundle,
    write_csv,
    write_json,
)
from .kernel import KernelConfig, scale_features, stacked_kernel_matrix
from .log import configure_logging
from .matrix import Matrix, as_matrix

logger = structlog.get_logger(__name__)

PROG = "covnmf"


class FitSummary(BaseModel):
    """summary.json of a fit bundle."""

    r_squared: float | None
    objective: float
    iterations: int
    converged: bool
    restart_index: int
    restart_objectives: list[float]
    seed: int
    covariates: CovariateMode
    betas: list[float]
    shift: float
    config: FitConfig


class CvBest(BaseModel):
    """best.json of a cross-validation run."""

    beta: float
    rank: int
    gamma: float
    mean_error: float
    folds: int
    seed: int
    baseline_objective: float | None = None
    baseline_r_squared: float | None = None


class Comparison(BaseModel):
    """comparison.json of gcm-compare."""

    theta_nmf: list[list[float]]
    theta_gcm: list[list[float]]
    max_abs_diff: float
    r_squared_nmf: float | None
    r_squared_gcm: float | None
    r_squared_line: float | None = None
    line_degree: int | None = None


def _finite_or_none(value: float) -> float | None:
    return None if math.isnan(value) else value


# Data loading


def _load_observations(args: argparse.Namespace) -> tuple[LabeledMatrix, float]:
    Y = ingest_csv(args.y, args.orientation)
    shift = 0.0
    if args.min_shift:
        Y, shift = min_shift(Y)
    require_nonnegative_cells(Y, "Y")
    return Y, shift


def _covariate_mode(value: str) -> CovariateMode:
    name = value.strip().lower()
    if name in (CovariateMode.IDENTITY.value, CovariateMode.KERNEL.value):
        return CovariateMode(name)
    return CovariateMode.EXPLICIT


def _kernel_blocks(args: argparse.Namespace, Y: LabeledMatrix) -> list[KernelConfig]:
    features = args.features or []
    betas = args.beta or []
    if not features:
        raise ConfigurationError("kernel covariates need --features")
    if len(betas) == 1 and len(features) > 1:
        betas = betas * len(features)
    if len(betas) != len(features):
        raise ConfigurationError(
            "give one --beta per --features block", features=len(features), betas=len(betas)
        )

    blocks: list[KernelConfig] = []
    for path, beta in zip(features, betas, strict=True):
        U = align_columns(Y, ingest_csv(path, args.orientation), "features")
        if args.scale_features:
            anchors, scaling = scale_features(U.values)
            blocks.append(KernelConfig(beta, anchors, scaling))
        else:
            blocks.append(KernelConfig(beta, U.values))
    return blocks


def _covariates(
    args: argparse.Namespace, Y: LabeledMatrix
) -> tuple[LabeledMatrix, list[KernelConfig]]:
    mode = _covariate_mode(args.covariates)
    ids = Y.col_labels
    if mode is CovariateMode.IDENTITY:
        return LabeledMatrix(as_matrix(np.eye(len(ids))), ids, ids), []
    if mode is CovariateMode.EXPLICIT:
        A = align_columns(Y, ingest_csv(args.covariates, args.orientation), "covariates")
        require_nonnegative_cells(A, "A")
        return A, []

    blocks = _kernel_blocks(args, Y)
    if len(blocks) == 1:
        labels = ids
    else:
        labels = tuple(f"k{b}_{i}" for b in range(len(blocks)) for i in ids)
    return LabeledMatrix(stacked_kernel_matrix(blocks), labels, ids), blocks


def _fit_config(args: argparse.Namespace, settings: CovNMFSettings) -> FitConfig:
    return FitConfig.from_settings(
        settings,
        rank=args.rank,
        loss=args.loss,
        gamma=args.gamma,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        restarts=args.restarts,
        init=args.init,
        normalization=args.normalization,
    )


def _fit(Y: LabeledMatrix, A: LabeledMatrix, config: FitConfig, required: bool) -> nmf.FitResult:
    result = nmf.fit(Y.values, A.values, config)
    if required and not result.converged:
        raise ConvergenceError(
            "fit stopped at the iteration cap",
            iterations=result.iterations,
            objective=result.objective,
        )
    return result


# Subcommands


def run_fit(args: argparse.Namespace, settings: CovNMFSettings) -> int:
    Y, shift = _load_observations(args)
    A, blocks = _covariates(args, Y)
    config = _fit_config(args, settings)
    result = _fit(Y, A, config, args.require_convergence)

    bundle = ModelBundle(
        model=result.model,
        variables=Y.row_labels,
        individuals=Y.col_labels,
        covariate_labels=A.row_labels,
        kernels=tuple(blocks),
    )
    summary = FitSummary(
        r_squared=_finite_or_none(result.r_squared),
        objective=result.objective,
        iterations=result.iterations,
        converged=result.converged,
        restart_index=result.restart_index,
        restart_objectives=list(result.restart_objectives),
        seed=config.seed,
        covariates=_covariate_mode(args.covariates),
        betas=[block.beta for block in blocks],
        shift=shift,
        config=config,
    )
    save_model_bundle(args.out, bundle, summary, settings.float_format)
    return 0


def run_cv(args: argparse.Namespace, settings: CovNMFSettings) -> int:
    Y, shift = _load_observations(args)
    if not args.features or len(args.features) != 1:
        raise ConfigurationError("cv needs exactly one --features file")
    data = DatasetBundle.aligned(Y, U=ingest_csv(args.features[0], args.orientation), shift=shift)
    U = data.require_features()

    if args.rank is None and args.rank_grid:
        args.rank = args.rank_grid[0]
    config = _fit_config(args, settings)
    plan = cv.CvPlan(
        folds=args.folds if args.folds is not None else settings.folds,
        beta_grid=args.beta_grid,
        q_grid=args.rank_grid,
        gamma_grid=args.gamma_grid,
        seed=config.seed,
        scale_features=args.scale_features,
    )
    result = cv.cross_validate(Y.values, U.values, plan, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    best = CvBest(
        beta=result.best.beta,
        rank=result.best.rank,
        gamma=result.best.gamma,
        mean_error=result.best_error,
        folds=result.fold_errors.shape[1],
        seed=plan.seed,
    )
    if args.objective_path:
        path = cv.objective_path(
            Y.values, U.values, plan.beta_grid, config, scale=args.scale_features
        )
        path.to_frame().to_csv(
            out / "objective_path.csv",
            index=False,
            float_format=settings.float_format,
            lineterminator="\n",
        )
        best.baseline_objective = path.baseline_objective
        best.baseline_r_squared = _finite_or_none(path.baseline_r_squared)

    result.to_frame().to_csv(
        out / "cv_curve.csv",
        index=False,
        float_format=settings.float_format,
        lineterminator="\n",
    )
    write_json(out / "best.json", best)
    logger.info("cv_written", directory=str(out), beta=best.beta)
    return 0


def run_predict(args: argparse.Namespace, settings: CovNMFSettings) -> int:
    bundle = load_model_bundle(args.model)
    inputs = [ingest_csv(path, args.orientation) for path in args.features or []]
    if not inputs:
        raise ConfigurationError("predict needs --features")
    ids = inputs[0].col_labels
    inputs = [inputs[0]] + [align_columns(inputs[0], p, "features") for p in inputs[1:]]

    if bundle.kernels:
        if len(inputs) != len(bundle.kernels):
            raise ConfigurationError(
                "give one --features file per kernel block",
                blocks=len(bundle.kernels),
                features=len(inputs),
            )
        A_new = stacked_kernel_matrix(bundle.kernels, [p.values for p in inputs])
    else:
        A_new = align_rows(bundle.covariate_labels, inputs[0], "covariates").values

    predictions = nmf.predict(bundle.model, A_new)
    probabilities = nmf.membership_probabilities(bundle.model.theta @ A_new)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "predictions.csv",
        LabeledMatrix(as_matrix(predictions), bundle.variables, ids),
        settings.float_format,
    )
    write_csv(
        out / "probabilities.csv",
        LabeledMatrix(probabilities, bundle.basis_labels, ids),
        settings.float_format,
    )
    logger.info("predictions_written", directory=str(out), points=len(ids))
    return 0


def _line_basis(Y: LabeledMatrix, degree: int) -> Matrix:
    try:
        times = [float(label) for label in Y.row_labels]
    except ValueError as exc:
        raise ConfigurationError(
            "--line-degree needs numeric row labels (measurement times)"
        ) from exc
    return gcm.polynomial_basis(times, degree)


def run_gcm_compare(args: argparse.Namespace, settings: CovNMFSettings) -> int:
    Y, _ = _load_observations(args)
    A, _ = _covariates(args, Y)
    config = _fit_config(args, settings)
    result = _fit(Y, A, config, args.require_convergence)

    model = result.model
    estimate = gcm.gcm_mle(Y.values, model.X, A.values, settings.condition_limit)
    comparison = Comparison(
        theta_nmf=model.theta.tolist(),
        theta_gcm=estimate.theta_hat.tolist(),
        max_abs_diff=float(np.max(np.abs(model.theta - estimate.theta_hat))),
        r_squared_nmf=_finite_or_none(result.r_squared),
        r_squared_gcm=_finite_or_none(gcm.gcm_r_squared(Y.values, model.X, estimate, A.values)),
    )
    if args.line_degree is not None:
        line = _line_basis(Y, args.line_degree)
        line_estimate = gcm.gcm_mle(Y.values, line, A.values, settings.condition_limit)
        comparison.r_squared_line = gcm.gcm_r_squared(Y.values, line, line_estimate, A.values)
        comparison.line_degree = args.line_degree

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "comparison.json", comparison)
    logger.info("comparison_written", directory=str(out), max_abs_diff=comparison.max_abs_diff)
    return 0


def run_cluster(args: argparse.Namespace, settings: CovNMFSettings) -> int:
    bundle = load_model_bundle(args.model)
    model = bundle.model
    probabilities = nmf.membership_probabilities(model.B)
    labels = nmf.hard_assignments(probabilities)
    bases = bundle.basis_labels

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "probabilities.csv",
        LabeledMatrix(probabilities, bases, bundle.individuals),
        settings.float_format,
    )
    pd.DataFrame(
        {
            "individual": list(bundle.individuals),
            "basis": [bases[i] for i in labels],
            "probability": probabilities[labels, np.arange(labels.size)],
        }
    ).to_csv(
        out / "assignments.csv",
        index=False,
        float_format=settings.float_format,
        lineterminator="\n",
    )
    write_csv(
        out / "contributions.csv",
        LabeledMatrix(nmf.basis_contributions(model.X), bundle.variables, bases),
        settings.float_format,
    )
    logger.info("clusters_written", directory=str(out), individuals=labels.size)
    return 0


# Argument parsing


def _add_data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--y", required=True, type=Path, help="observation CSV")
    parser.add_argument(
        "--orientation",
        type=Orientation,
        choices=list(Orientation),
        default=Orientation.COLUMNS,
        help="whether individuals are the columns or the rows of every CSV input",
    )
    parser.add_argument(
        "--min-shift", action="store_true", help="subtract min(Y) so the minimum is 0"
    )
    parser.add_argument(
        "--features", action="append", type=Path, help="feature CSV (repeatable)"
    )
    parser.add_argument(
        "--scale-features",
        action="store_true",
        help="map every feature onto [0, 1] before building kernels",
    )


def _add_fit_options(parser: argparse.ArgumentParser, rank_required: bool = True) -> None:
    parser.add_argument("--rank", type=int, required=rank_required, help="number of bases Q")
    parser.add_argument("--loss", choices=[loss.value for loss in Loss], default=None)
    parser.add_argument("--gamma", type=float, default=None, help="L2 penalty on Theta")
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--max-iter", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--restarts", type=int, default=None)
    parser.add_argument(
        "--init",
        type=str.lower,
        choices=[init.value for init in Initialization],
        default=None,
        help="basis initialization of every restart",
    )
    parser.add_argument(
        "--normalization",
        type=str.lower,
        choices=[norm.value for norm in Normalization],
        default=None,
        help="preserve-fit rescales Theta with X; literal leaves Theta unchanged",
    )
    parser.add_argument(
        "--require-convergence",
        action="store_true",
        help="exit 5 without writing when the iteration cap is hit",
    )


def _add_covariate_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--covariates",
        default=CovariateMode.IDENTITY.value,
        metavar="{identity,kernel,PATH}",
        help="identity, kernel (built from --features) or a covariate CSV",
    )
    parser.add_argument(
        "--beta", action="append", type=float, help="kernel bandwidth (one per --features)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG, description="Non-negative matrix factorization with covariates"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", choices=[level.value for level in LogLevel])
    parser.add_argument("--log-format", choices=[fmt.value for fmt in LogFormat])
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", help="fit X and Theta and write a model bundle")
    _add_data_options(fit)
    _add_covariate_options(fit)
    _add_fit_options(fit)
    fit.add_argument("--out", required=True, type=Path)
    fit.set_defaults(handler=run_fit)

    cross = commands.add_parser("cv", help="cross-validate the kernel bandwidth")
    _add_data_options(cross)
    _add_fit_options(cross, rank_required=False)
    cross.add_argument("--beta-grid", type=float, nargs="+", required=True)
    cross.add_argument("--rank-grid", type=int, nargs="+")
    cross.add_argument("--gamma-grid", type=float, nargs="+")
    cross.add_argument("--folds", type=int)
    cross.add_argument(
        "--objective-path",
        action="store_true",
        help="also write the in-sample objective for every beta",
    )
    cross.add_argument("--out", required=True, type=Path)
    cross.set_defaults(handler=run_cv)

    predict = commands.add_parser("predict", help="predict for new points")
    predict.add_argument("--model", required=True, type=Path, help="fit output directory")
    predict.add_argument(
        "--features",
        action="append",
        type=Path,
        required=True,
        help="new points per kernel block, or new covariates for non-kernel fits",
    )
    predict.add_argument(
        "--orientation", type=Orientation, choices=list(Orientation), default=Orientation.COLUMNS
    )
    predict.add_argument("--out", required=True, type=Path)
    predict.set_defaults(handler=run_predict)

    compare = commands.add_parser("gcm-compare", help="compare with the growth curve model")
    _add_data_options(compare)
    _add_covariate_options(compare)
    _add_fit_options(compare)
    compare.add_argument(
        "--line-degree", type=int, help="also fit a polynomial basis of this degree"
    )
    compare.add_argument("--out", required=True, type=Path)
    compare.set_defaults(handler=run_gcm_compare)

    cluster = commands.add_parser("cluster", help="cluster tables from a saved fit")
    cluster.add_argument("--model", required=True, type=Path)
    cluster.add_argument("--out", required=True, type=Path)
    cluster.set_defaults(handler=run_cluster)

    return parser


def _report(code: str, exit_code: int, message: str, context: dict[str, object]) -> None:
    details = "".join(f" {k}={str(v).replace(' ', '')}" for k, v in context.items())
    escaped = message.replace('"', "'")
    print(
        f'{PROG}: error code={code} exit={exit_code} message="{escaped}"{details}',
        file=sys.stderr,
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run the subcommand and map errors to exit codes."""
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
        configure_logging(
            args.log_level or settings.log_level, args.log_format or settings.log_format
        )
        handler: Callable[[argparse.Namespace, CovNMFSettings], int] = args.handler
        return handler(args, settings)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "value"
        _report(
            ConfigurationError.code,
            ConfigurationError.exit_code,
            f"{location}: {first['msg']}",
            {},
        )
        return ConfigurationError.exit_code
    except CovNMFError as exc:
        _report(exc.code, exc.exit_code, exc.message, exc.context)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
