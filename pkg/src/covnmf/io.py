"""CSV ingestion and result bundles.

Input CSVs carry a header row of column ids and a first column of row labels. By
default individuals are columns; ``Orientation.ROWS`` transposes files that store
one individual per row. Matrices are written with 17 significant digits so that
reading them back reproduces every float exactly.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, RootModel, ValidationError

from .errors import ConfigurationError, DimensionError, IngestionError, InvalidValueError
from .kernel import FeatureScaling, KernelConfig
from .matrix import Matrix, as_matrix, as_vector
from .nmf import FactorModel, membership_probabilities

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = "%.17g"


class Orientation(str, Enum):
    """Whether individuals are the columns or the rows of a CSV file."""

    COLUMNS = "columns"
    ROWS = "rows"


@dataclass(frozen=True)
class LabeledMatrix:
    """A matrix with string labels for its rows and columns."""

    values: Matrix
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.row_labels), len(self.col_labels)):
            raise DimensionError(
                f"labels {len(self.row_labels)}x{len(self.col_labels)} do not match "
                f"values {self.values.shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.row_labels), len(self.col_labels))

    def transpose(self) -> "LabeledMatrix":
        return LabeledMatrix(as_matrix(self.values.T), self.col_labels, self.row_labels)

    def select_columns(self, ids: Sequence[str]) -> "LabeledMatrix":
        """Reorder (or subset) columns to follow ``ids``."""
        missing = [i for i in ids if i not in self.col_labels]
        if missing:
            raise IngestionError("column ids not found", missing=",".join(missing[:5]))
        index = [self.col_labels.index(i) for i in ids]
        return LabeledMatrix(as_matrix(self.values[:, index]), self.row_labels, tuple(ids))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=list(self.row_labels), columns=list(self.col_labels))


def _duplicates(labels: pd.Series) -> list[str]:
    return sorted(set(labels[labels.duplicated()]))


def ingest_csv(path: str | Path, orientation: Orientation = Orientation.COLUMNS) -> LabeledMatrix:
    """Read a labeled numeric CSV.

    Raises:
        IngestionError: For a missing, empty or ragged file, a non-numeric cell
            (with its 1-based line and column) or duplicate labels
    """
    source = Path(path)
    try:
        raw = pd.read_csv(source, header=None, dtype=str, na_filter=False)
    except FileNotFoundError as exc:
        raise IngestionError("file not found", path=str(source)) from exc
    except pd.errors.EmptyDataError as exc:
        raise IngestionError("file is empty", path=str(source)) from exc
    except pd.errors.ParserError as exc:
        raise IngestionError(f"ragged rows: {exc}", path=str(source)) from exc

    if raw.isna().to_numpy().any():
        line = int(np.flatnonzero(raw.isna().any(axis=1).to_numpy())[0]) + 1
        raise IngestionError("ragged rows", path=str(source), line=line)
    if raw.shape[0] < 2 or raw.shape[1] < 2:
        raise IngestionError(
            "need a header row, a label column and at least one value", path=str(source)
        )

    col_ids = raw.iloc[0, 1:].str.strip()
    row_ids = raw.iloc[1:, 0].str.strip()
    for kind, labels in (("column", col_ids), ("row", row_ids)):
        dupes = _duplicates(labels)
        if dupes:
            raise IngestionError(
                f"duplicate {kind} labels", path=str(source), labels=",".join(dupes[:5])
            )

    body = raw.iloc[1:, 1:].apply(lambda column: column.str.strip())
    try:
        values = body.to_numpy(dtype=str).astype(np.float64)
    except ValueError:
        coerced = body.apply(pd.to_numeric, errors="coerce")
        row, col = np.argwhere(coerced.isna().to_numpy())[0]
        raise IngestionError(
            "non-numeric cell",
            path=str(source),
            line=int(row) + 2,
            column=int(col) + 2,
            value=body.iat[row, col],
        ) from None

    try:
        matrix = LabeledMatrix(as_matrix(values, source.name), tuple(row_ids), tuple(col_ids))
    except InvalidValueError as exc:
        exc.context["path"] = str(source)
        raise
    if Orientation(orientation) is Orientation.ROWS:
        matrix = matrix.transpose()
    logger.debug("csv_ingested", path=str(source), shape=matrix.shape)
    return matrix


def require_nonnegative_cells(matrix: LabeledMatrix, name: str) -> None:
    """Raise naming the first negative cell by its row label and column id."""
    negative = np.argwhere(matrix.values < 0)
    if negative.size:
        row, col = negative[0]
        raise InvalidValueError(
            f"{name} must be non-negative (use --min-shift to shift it)",
            row=matrix.row_labels[row],
            column=matrix.col_labels[col],
            value=float(matrix.values[row, col]),
        )


def min_shift(matrix: LabeledMatrix) -> tuple[LabeledMatrix, float]:
    """Subtract the global minimum so the smallest entry becomes 0."""
    shift = float(matrix.values.min())
    shifted = LabeledMatrix(as_matrix(matrix.values - shift), matrix.row_labels, matrix.col_labels)
    return shifted, shift


def align_columns(
    reference: LabeledMatrix, other: LabeledMatrix, name: str
) -> LabeledMatrix:
    """Reorder the columns of ``other`` to the individual order of ``reference``."""
    ids = reference.col_labels
    if set(other.col_labels) != set(ids) or len(other.col_labels) != len(ids):
        raise IngestionError(
            f"{name} and observations describe different individuals",
            observations=len(ids),
            other=len(other.col_labels),
        )
    return other.select_columns(ids)


def align_rows(
    labels: Sequence[str], other: LabeledMatrix, name: str
) -> LabeledMatrix:
    """Reorder the rows of ``other`` to follow ``labels``."""
    if set(other.row_labels) != set(labels) or len(other.row_labels) != len(labels):
        raise IngestionError(
            f"{name} rows do not match the model",
            expected=",".join(labels[:5]),
            found=",".join(other.row_labels[:5]),
        )
    return other.transpose().select_columns(labels).transpose()


@dataclass(frozen=True)
class DatasetBundle:
    """Observations with the optional features or explicit covariates of the same individuals."""

    Y: LabeledMatrix
    U: LabeledMatrix | None = None
    A: LabeledMatrix | None = None
    shift: float = 0.0

    @classmethod
    def aligned(
        cls,
        Y: LabeledMatrix,
        U: LabeledMatrix | None = None,
        A: LabeledMatrix | None = None,
        shift: float = 0.0,
    ) -> "DatasetBundle":
        """Reorder U and A columns to the individual order of Y."""
        return cls(
            Y=Y,
            U=align_columns(Y, U, "features") if U is not None else None,
            A=align_columns(Y, A, "covariates") if A is not None else None,
            shift=shift,
        )

    def require_features(self) -> LabeledMatrix:
        if self.U is None:
            raise ConfigurationError("features are required for this workflow")
        return self.U


def write_csv(
    path: str | Path, matrix: LabeledMatrix, float_format: str = FLOAT_FORMAT
) -> Path:
    target = Path(path)
    matrix.to_frame().to_csv(target, float_format=float_format, lineterminator="\n")
    return target


def write_json(path: str | Path, payload: BaseModel) -> Path:
    target = Path(path)
    target.write_text(payload.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return target


def _labels(prefix: str, count: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(count))


class KernelBlockRecord(BaseModel):
    """One kernel block of a saved model; anchors live in a sibling CSV."""

    beta: float
    anchors: str
    minimum: list[float] | None = None
    maximum: list[float] | None = None


class KernelManifest(RootModel[list[KernelBlockRecord]]):
    """kernels.json of a model bundle."""


@dataclass(frozen=True)
class ModelBundle:
    """Everything needed to predict from a saved fit."""

    model: FactorModel
    variables: tuple[str, ...]
    individuals: tuple[str, ...]
    covariate_labels: tuple[str, ...]
    kernels: tuple[KernelConfig, ...] = field(default=())

    @property
    def basis_labels(self) -> tuple[str, ...]:
        return _labels("Basis", self.model.rank)


def save_model_bundle(
    directory: str | Path,
    bundle: ModelBundle,
    summary: BaseModel,
    float_format: str = FLOAT_FORMAT,
) -> list[Path]:
    """Write X, Theta, A, B, Yhat, probabilities, kernel anchors and summary.json."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    model = bundle.model
    bases = bundle.basis_labels
    tables = {
        "X.csv": LabeledMatrix(model.X, bundle.variables, bases),
        "Theta.csv": LabeledMatrix(model.theta, bases, bundle.covariate_labels),
        "A.csv": LabeledMatrix(model.A, bundle.covariate_labels, bundle.individuals),
        "B.csv": LabeledMatrix(as_matrix(model.B), bases, bundle.individuals),
        "Yhat.csv": LabeledMatrix(as_matrix(model.Yhat), bundle.variables, bundle.individuals),
        "probabilities.csv": LabeledMatrix(
            membership_probabilities(model.B), bases, bundle.individuals
        ),
    }
    written = [write_csv(out / name, table, float_format) for name, table in tables.items()]

    records: list[KernelBlockRecord] = []
    for i, block in enumerate(bundle.kernels):
        anchors = LabeledMatrix(
            block.anchors,
            _labels("feature", block.anchors.shape[0]),
            _labels("anchor", block.anchors.shape[1]),
        )
        written.append(write_csv(out / f"anchors_{i}.csv", anchors, float_format))
        records.append(
            KernelBlockRecord(
                beta=block.beta,
                anchors=f"anchors_{i}.csv",
                minimum=block.scaling.minimum.tolist() if block.scaling else None,
                maximum=block.scaling.maximum.tolist() if block.scaling else None,
            )
        )
    written.append(write_json(out / "kernels.json", KernelManifest(records)))
    written.append(write_json(out / "summary.json", summary))
    logger.info("model_bundle_written", directory=str(out), files=len(written))
    return written


def load_model_bundle(directory: str | Path) -> ModelBundle:
    """Read a bundle written by ``save_model_bundle``."""
    source = Path(directory)
    if not source.is_dir():
        raise IngestionError("model directory not found", path=str(source))
    X = ingest_csv(source / "X.csv")
    theta = ingest_csv(source / "Theta.csv")
    A = ingest_csv(source / "A.csv")

    kernels: list[KernelConfig] = []
    kernels_file = source / "kernels.json"
    if kernels_file.exists():
        try:
            manifest = KernelManifest.model_validate_json(
                kernels_file.read_text(encoding="utf-8")
            )
        except ValidationError as exc:
            raise IngestionError("malformed kernels.json", path=str(kernels_file)) from exc
        for record in manifest.root:
            scaling = None
            if record.minimum is not None and record.maximum is not None:
                scaling = FeatureScaling(as_vector(record.minimum), as_vector(record.maximum))
            anchors = ingest_csv(source / record.anchors).values
            kernels.append(KernelConfig(record.beta, anchors, scaling))

    return ModelBundle(
        model=FactorModel(X.values, theta.values, A.values),
        variables=X.row_labels,
        individuals=A.col_labels,
        covariate_labels=theta.col_labels,
        kernels=tuple(kernels),
    )
