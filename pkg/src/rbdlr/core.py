"""Domain types, norms and the objective value used for monitoring."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# Eigenvalues of a Laplacian below this magnitude are treated as exact zeros.
EIG_CLAMP = 1e-12


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class SolverDivergenceError(ArithmeticError):
    """Raised when an iterate becomes non-finite during fitting."""

    def __init__(self, iteration: int, variable: str):
        self.iteration = iteration
        self.variable = variable
        super().__init__(
            f"solver diverged at iteration {iteration}: {variable} has non-finite entries"
        )


class Mode(str, enum.Enum):
    RBDLR = "rbdlr"
    FLLRR = "fllrr"


@dataclass
class Dataset:
    """Data matrix with samples as columns and optional integer labels."""

    X: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidInputError(f"X must be a non-empty 2-D matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("X contains non-finite entries")
        self.X = X
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or labels.shape[0] != X.shape[1]:
                raise InvalidInputError(
                    f"labels must have length {X.shape[1]}, got shape {labels.shape}"
                )
            if labels.size and (not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0):
                raise InvalidInputError("labels must be nonnegative integers")
            self.labels = labels.astype(np.int64)

    @property
    def n_features(self) -> int:
        return self.X.shape[0]

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> Optional[int]:
        if self.labels is None:
            return None
        return int(np.unique(self.labels).size)


@dataclass(frozen=True)
class Hyperparams:
    """Tuning record for the solver.

    ``k`` may be left as ``None`` and is then taken from the number of
    distinct labels of the dataset being fitted.
    """

    alpha: float = 1.0
    beta: float = 1e-5
    gamma: float = 1e-2
    k: Optional[int] = None
    mu0: float = 1e-6
    mu_max: float = 1e10
    eta: float = 1.12
    eps: float = 1e-7
    max_iter: int = 500
    mode: Mode = Mode.RBDLR

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.alpha < 0 or self.beta < 0:
            raise InvalidInputError("alpha and beta must be nonnegative")
        if not self.gamma > 0:
            raise InvalidInputError("gamma must be positive")
        if self.k is not None and (int(self.k) != self.k or self.k < 1):
            raise InvalidInputError(f"k must be a positive integer, got {self.k}")
        if not (0 < self.mu0 <= self.mu_max):
            raise InvalidInputError("need 0 < mu0 <= mu_max")
        if not self.eta > 1:
            raise InvalidInputError("eta must exceed 1")
        if not self.eps > 0:
            raise InvalidInputError("eps must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidInputError("max_iter must be a positive integer")
        if self.mode is Mode.FLLRR and (self.alpha != 0 or self.beta != 0):
            raise InvalidInputError("mode FLLRR requires alpha = beta = 0")
        if self.mode is Mode.RBDLR and not self.alpha > 0:
            raise InvalidInputError("mode RBDLR requires alpha > 0")

    def resolve_k(self, data: Dataset) -> int:
        """Return the block count to use on ``data``, validating k <= N."""
        k = self.k
        if k is None:
            k = data.n_classes
            if k is None:
                raise InvalidInputError("k must be given when the dataset carries no labels")
        if k > data.n_samples:
            raise InvalidInputError(f"k = {k} exceeds the number of samples {data.n_samples}")
        return int(k)


@dataclass
class SolverState:
    U: np.ndarray
    Z: np.ndarray
    P: np.ndarray
    E: np.ndarray
    W: np.ndarray
    M: np.ndarray
    theta: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    mu: float
    iter: int = 0

    @classmethod
    def initial(cls, X: np.ndarray, mu0: float) -> "SolverState":
        """Starting point: U = X and every other iterate zero."""
        n, N = X.shape
        return cls(
            U=X.copy(),
            Z=np.zeros((N, N)),
            P=np.zeros((n, n)),
            E=np.zeros((n, N)),
            W=np.zeros((N, N)),
            M=np.zeros((N, N)),
            theta=np.zeros((N, 1)),
            Y1=np.zeros((n, N)),
            Y2=np.zeros((n, N)),
            mu=float(mu0),
        )


@dataclass
class FitReport:
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)
    wall_time_seconds: float = 0.0

    @property
    def final_residuals(self):
        return self.residual_history[-1] if self.residual_history else (np.nan, np.nan)


@dataclass
class FitResult:
    Z: np.ndarray
    P: np.ndarray
    E: np.ndarray
    W: np.ndarray
    theta: np.ndarray
    report: FitReport


def l21_norm(A) -> float:
    """Sum of the Euclidean norms of the columns of ``A``."""
    A = np.asarray(A, dtype=np.float64)
    return float(np.sum(np.linalg.norm(A, axis=0)))


def check_weights(W, atol: float = 1e-10) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise InvalidInputError(f"W must be square, got shape {W.shape}")
    scale = max(1.0, float(np.max(np.abs(W), initial=0.0)))
    if not np.allclose(W, W.T, rtol=0.0, atol=atol * scale):
        raise InvalidInputError("W must be symmetric")
    if np.any(W < -atol * scale):
        raise InvalidInputError("W must be entrywise nonnegative")
    return W


def block_diag_value(W, k: int) -> float:
    """k-block-diagonal regularizer: sum of the k smallest Laplacian eigenvalues.

    The value is zero exactly when the graph of ``W`` has at least ``k``
    connected components.
    """
    W = check_weights(W)
    N = W.shape[0]
    if not 1 <= k <= N:
        raise InvalidInputError(f"k must lie in [1, {N}], got {k}")
    L = np.diag(W.sum(axis=1)) - W
    evals = np.linalg.eigvalsh(L)
    evals = np.where(np.abs(evals) < EIG_CLAMP, 0.0, evals)
    return float(np.sum(np.sort(evals, kind="stable")[:k]))


def objective_value(X, state: SolverState, hp: Hyperparams, k: Optional[int] = None) -> float:
    """Full objective at ``state`` with the auxiliary pair built from U = X - E.

    ``k`` defaults to ``hp.k``; it is only needed when ``beta > 0``.
    """
    from .blockdiag import assemble_aux

    X = np.asarray(X, dtype=np.float64)
    n, N = X.shape
    expected = {
        "Z": (N, N), "P": (n, n), "E": (n, N), "W": (N, N), "theta": (N, 1),
    }
    for name, shape in expected.items():
        got = np.shape(getattr(state, name))
        if got != shape:
            raise InvalidInputError(f"{name} has shape {got}, expected {shape}")

    value = np.sum(state.Z ** 2) + np.sum(state.P ** 2) + hp.gamma * l21_norm(state.E)
    if hp.alpha > 0 or hp.beta > 0:
        U = X - state.E
        aux = assemble_aux(state.Z, state.theta, state.P, U, hp.alpha, hp.beta)
        value += np.sum((aux.A_plus - aux.A_minus @ state.W) ** 2)
    if hp.beta > 0:
        k = hp.k if k is None else k
        if k is None:
            raise InvalidInputError("k is required to evaluate the block-diagonal term")
        value += hp.beta * block_diag_value(state.W, k)
    return float(value)

