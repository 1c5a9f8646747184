"""Configuration management for covnmf.

Provides type-safe settings with Pydantic Settings (environment variables with the
``COVNMF_`` prefix and an optional ``.env`` file) plus the validated fit
configuration shared by the library and the command line.
"""

from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class LogLevel(str, Enum):
    """Log level enumeration."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LogFormat(str, Enum):
    """Log renderer enumeration."""

    CONSOLE = "console"
    JSON = "json"


class Loss(str, Enum):
    """Discrepancy between the observations and the fitted values."""

    EUCLIDEAN = "euclidean"
    KL = "kl"


class Initialization(str, Enum):
    """Starting point of the basis for each restart."""

    RANDOM = "random"
    KMEANS = "kmeans"


class Normalization(str, Enum):
    """How the fitting loop rescales X to unit column sums."""

    PRESERVE_FIT = "preserve-fit"
    LITERAL = "literal"


class CovariateMode(str, Enum):
    """How the covariate matrix A is obtained."""

    IDENTITY = "identity"
    EXPLICIT = "explicit"
    KERNEL = "kernel"


def _lower(v: Any) -> Any:
    if isinstance(v, str):
        return v.strip().lower()
    return v


class CovNMFSettings(BaseSettings):
    """Process-wide defaults for covnmf."""

    # Logging
    log_level: LogLevel = Field(default=LogLevel.WARNING, description="Logging level")
    log_format: LogFormat = Field(
        default=LogFormat.CONSOLE, description="Log renderer"
    )

    # Optimizer defaults
    division_floor: float = Field(
        default=1e-16, gt=0.0, description="Floor applied to update denominators"
    )
    tol: float = Field(
        default=1e-8, gt=0.0, description="Relative objective change at convergence"
    )
    max_iter: int = Field(default=5000, ge=1, description="Iteration cap per restart")
    seed: int = Field(default=1, ge=0, description="Seed for factor initialization")
    restarts: int = Field(default=5, ge=1, description="Seeded restarts per fit")

    # Cross-validation
    folds: int = Field(default=10, ge=2, description="Cross-validation folds")

    # Linear algebra
    condition_limit: float = Field(
        default=1e12, gt=1.0, description="Largest condition number accepted"
    )

    # Output
    float_format: str = Field(
        default="%.17g", description="printf format for matrix entries"
    )

    model_config = SettingsConfigDict(
        env_prefix="COVNMF_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def validate_log_level(cls, v: Any) -> Any:
        """Accept log levels in any case."""
        if isinstance(v, str):
            return v.strip().upper()
        return v

    @field_validator("log_format", mode="before")
    @classmethod
    def validate_log_format(cls, v: Any) -> Any:
        """Normalize the renderer name."""
        return _lower(v)


def get_settings() -> CovNMFSettings:
    """Get process settings."""
    return CovNMFSettings()


class FitConfig(BaseModel):
    """Settings of one factorization: rank, objective, penalty and stopping rule."""

    rank: int = Field(ge=1, description="Number of bases Q")
    loss: Loss = Field(default=Loss.EUCLIDEAN, description="Objective function")
    gamma: float = Field(default=0.0, ge=0.0, description="L2 penalty on Theta")
    tol: float = Field(default=1e-8, gt=0.0, description="Convergence tolerance")
    max_iter: int = Field(default=5000, ge=1, description="Iteration cap")
    seed: int = Field(default=1, ge=0, description="Initialization seed")
    restarts: int = Field(default=5, ge=1, description="Seeded restarts")
    floor: float = Field(default=1e-16, gt=0.0, description="Division floor")
    init: Initialization = Field(
        default=Initialization.RANDOM, description="Basis initialization"
    )
    normalization: Normalization = Field(
        default=Normalization.PRESERVE_FIT, description="Basis rescaling in the loop"
    )

    model_config = ConfigDict(frozen=True)

    @field_validator("loss", "init", "normalization", mode="before")
    @classmethod
    def validate_choice(cls, v: Any) -> Any:
        """Accept enum names in any case."""
        return _lower(v)

    @classmethod
    def from_settings(
        cls, settings: CovNMFSettings | None = None, **overrides: Any
    ) -> "FitConfig":
        """Build a config whose unspecified fields come from ``settings``."""
        settings = settings or get_settings()
        values: dict[str, Any] = {
            "tol": settings.tol,
            "max_iter": settings.max_iter,
            "seed": settings.seed,
            "restarts": settings.restarts,
            "floor": settings.division_floor,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
