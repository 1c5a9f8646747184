"""Test utilities and helper functions for covnmf tests."""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from covnmf import nmf
from covnmf.config import FitConfig


class InstanceBuilder:
    """Helper class for building random factorization problems."""

    @staticmethod
    def normalized_basis(rng: np.random.Generator, rows: int, rank: int) -> np.ndarray:
        """Positive P x Q basis with unit column sums."""
        basis = rng.uniform(0.1, 1.1, size=(rows, rank))
        return basis / basis.sum(axis=0)

    @staticmethod
    def exact_model(
        rng: np.random.Generator, rows: int, cols: int, rank: int, covariates: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Y = X0 Theta0 A with positive factors.

        Returns:
            Y, X0, Theta0 and A
        """
        X0 = InstanceBuilder.normalized_basis(rng, rows, rank)
        theta0 = rng.uniform(0.5, 1.5, size=(rank, covariates))
        A = rng.uniform(0.1, 1.1, size=(covariates, cols))
        return X0 @ theta0 @ A, X0, theta0, A

    @staticmethod
    def descent_problem(
        rng: np.random.Generator, loss: str
    ) -> tuple[np.ndarray, np.ndarray, FitConfig]:
        """Random small problem for checking per-half-step descent.

        Both losses draw Y from U(0, 10) and covariates from U(0.1, 1).
        """
        rows = int(rng.integers(2, 21))
        cols = int(rng.integers(2, 21))
        covariates = int(rng.integers(1, 5))
        rank = int(rng.integers(1, min(3, rows, cols) + 1))
        gamma = float(rng.choice([0.0, 0.1]))
        Y = rng.uniform(0.0, 10.0, size=(rows, cols))
        A = rng.uniform(0.1, 1.0, size=(covariates, cols))
        config = FitConfig(
            rank=rank,
            loss=loss,
            gamma=gamma,
            tol=1e-14,
            max_iter=100,
            seed=int(rng.integers(0, 1000)),
            restarts=1,
        )
        return Y, A, config


class ReferenceLoop:
    """Covariate-free NMF written directly in terms of B = Theta."""

    @staticmethod
    def euclidean_trace(Y: np.ndarray, config: FitConfig) -> list[float]:
        """Objective trace of plain NMF updating B itself (gamma = 0, one restart)."""
        floor = config.floor
        X, B = nmf.initialize_factors(
            Y.shape[0], config.rank, Y.shape[1], nmf.restart_rng(config.seed, 0)
        )
        Yhat = X @ B
        current = float(np.sum((Y - Yhat) * (Y - Yhat)) + 0.0 * np.sum(B * B))
        trace = [current]
        for iteration in range(1, config.max_iter + 1):
            previous = current

            X_next = X * ((Y @ B.T) / np.maximum(Yhat @ B.T, floor))
            sums = X_next.sum(axis=0)
            X_next, B_next = X_next / sums, B * sums[:, None]
            Yhat_next = X_next @ B_next
            candidate = float(
                np.sum((Y - Yhat_next) * (Y - Yhat_next)) + 0.0 * np.sum(B_next * B_next)
            )
            if candidate <= current:
                X, B, Yhat, current = X_next, B_next, Yhat_next, candidate
            trace.append(current)

            B = B * ((X.T @ Y) / np.maximum(X.T @ Yhat, floor))
            Yhat = X @ B
            current = float(np.sum((Y - Yhat) * (Y - Yhat)) + 0.0 * np.sum(B * B))
            trace.append(current)

            if nmf.has_converged(previous, current, config.tol):
                break
        return trace


class SmoothDataBuilder:
    """Observations generated from a smooth function of one feature."""

    @staticmethod
    def sinusoidal(
        n: int = 40, noise: float = 0.1, seed: int = 7
    ) -> tuple[np.ndarray, np.ndarray]:
        """Six variables mixing two positive profiles with sin/cos coefficients.

        Returns:
            Y (6 x n) and features U (1 x n) equally spaced on [0, 1]
        """
        rng = np.random.default_rng(seed)
        u = np.linspace(0.0, 1.0, n)
        profiles = np.array(
            [[5.0, 4.0, 3.0, 2.0, 1.0, 0.5], [0.5, 1.0, 2.0, 3.0, 4.0, 5.0]]
        ).T
        coefficients = np.vstack(
            [10.0 * (1.0 + np.sin(2 * np.pi * u)), 10.0 * (1.0 + np.cos(2 * np.pi * u))]
        )
        Y = profiles @ coefficients / profiles.sum(axis=0).max()
        Y = np.clip(Y + rng.normal(0.0, noise, size=Y.shape), 0.0, None)
        return Y, u[None, :]


class CsvBuilder:
    """Helper class for writing labeled CSV inputs."""

    @staticmethod
    def write(
        path: Path,
        values: np.ndarray,
        row_labels: Sequence[str] | None = None,
        col_labels: Sequence[str] | None = None,
    ) -> Path:
        """Write ``values`` with a header row and a label column."""
        rows = list(row_labels) if row_labels is not None else [f"v{i + 1}" for i in range(values.shape[0])]
        cols = list(col_labels) if col_labels is not None else CsvBuilder.ids(values.shape[1])
        pd.DataFrame(values, index=rows, columns=cols).to_csv(
            path, float_format="%.17g", lineterminator="\n"
        )
        return path

    @staticmethod
    def ids(count: int, prefix: str = "s") -> list[str]:
        return [f"{prefix}{i + 1:02d}" for i in range(count)]

    @staticmethod
    def write_text(path: Path, text: str) -> Path:
        path.write_text(text, encoding="utf-8")
        return path
