"""Bundled example data.

The orthodontic growth data of Potthoff and Roy: distance (mm) from the pituitary
to the pterygomaxillary fissure, measured at ages 8, 10, 12 and 14 for 16 boys
(M01..M16) and 11 girls (F01..F11). Ages are rows, children are columns.
"""

from collections.abc import Sequence
from importlib import resources

import numpy as np

from .io import LabeledMatrix, ingest_csv
from .matrix import as_matrix

ORTHODONT_FILE = "orthodont.csv"


def load_orthodont() -> LabeledMatrix:
    """4 x 27 observation matrix with row labels 8, 10, 12, 14."""
    with resources.as_file(resources.files("covnmf") / "data" / ORTHODONT_FILE) as path:
        return ingest_csv(path)


def orthodont_covariates(ids: Sequence[str]) -> LabeledMatrix:
    """Intercept row and male-dummy row for the given child ids."""
    male = [1.0 if child.startswith("M") else 0.0 for child in ids]
    values = as_matrix(np.vstack([np.ones(len(ids)), male]), "covariates")
    return LabeledMatrix(values, ("intercept", "male"), tuple(ids))
