"""Non-negative matrix factorization with covariates.

Factorizes a non-negative observation matrix as Y ~ X Theta A, where A holds known
covariates of the individuals (identity, explicit designs or Gaussian-kernel
designs), and compares the fitted parameters with the growth curve model.
"""

from .__version__ import __version__
from .config import FitConfig, Loss
from .log import configure_default_logging
from .nmf import FactorModel, FitResult, fit, membership_probabilities, predict

configure_default_logging()

__all__ = [
    "FactorModel",
    "FitConfig",
    "FitResult",
    "Loss",
    "__version__",
    "fit",
    "membership_probabilities",
    "predict",
]
