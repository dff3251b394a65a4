"""Graph Laplacian, Fantope step and the constrained weight solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import InvalidInputError, check_weights


@dataclass
class AuxPair:
    """Stacked matrices whose residual ``A_plus - A_minus @ W`` is penalised.

    Top N rows carry the coupling to the coefficients, bottom n rows the
    self-reconstruction of the projected clean data.
    """

    A_plus: np.ndarray
    A_minus: np.ndarray


def laplacian(W) -> np.ndarray:
    """Return ``Diag(W 1) - W`` for a symmetric nonnegative ``W``."""
    W = check_weights(W)
    return np.diag(W.sum(axis=1)) - W


def update_fantope(L, k: int) -> np.ndarray:
    """Minimise <L, M> over {0 <= M <= I, tr M = k}.

    The minimiser is the orthogonal projector onto the eigenvectors of the
    ``k`` smallest eigenvalues of ``L``. With ties at the k-th eigenvalue any
    such projector is optimal; the one returned is whatever ``eigh`` yields.
    """
    L = np.asarray(L, dtype=np.float64)
    N = L.shape[0]
    if L.ndim != 2 or L.shape[1] != N:
        raise InvalidInputError(f"L must be square, got shape {L.shape}")
    if not 1 <= k <= N:
        raise InvalidInputError(f"k must lie in [1, {N}], got {k}")
    evals, evecs = np.linalg.eigh((L + L.T) / 2)
    order = np.argsort(evals, kind="stable")[:k]
    V = evecs[:, order]
    return V @ V.T


def assemble_aux(Z, theta, P, U, alpha: float, beta: float) -> AuxPair:
    Z = np.asarray(Z, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64).reshape(-1, 1)
    n, N = U.shape
    if Z.shape != (N, N) or P.shape != (n, n) or theta.shape[0] != N:
        raise InvalidInputError(
            f"shape mismatch: Z {Z.shape}, P {P.shape}, theta {theta.shape}, U {U.shape}"
        )
    if alpha < 0 or beta < 0:
        raise InvalidInputError("alpha and beta must be nonnegative")
    sa, sb = np.sqrt(alpha), np.sqrt(beta)
    PU = sb * (P @ U)
    A_plus = np.vstack([sa * (Z + theta), PU])
    A_minus = np.vstack([sa * np.eye(N), PU])
    return AuxPair(A_plus, A_minus)


def solve_weights(aux: AuxPair, M, beta: float) -> np.ndarray:
    """Stationary point of ||A+ - A- W||_F^2 + beta <Diag(W 1) - W, M> in W.

    Solves ``2 A-^T A- W = 2 A-^T A+ - beta (diag(M) 1^T - M)`` by Cholesky.
    Raises ``numpy.linalg.LinAlgError`` if ``A-^T A-`` is not positive definite.
    """
    M = np.asarray(M, dtype=np.float64)
    Am, Ap = aux.A_minus, aux.A_plus
    N = Am.shape[1]
    if M.shape != (N, N) or Ap.shape != Am.shape:
        raise InvalidInputError("aux pair and M shapes are inconsistent")
    gram = 2.0 * (Am.T @ Am)
    rhs = 2.0 * (Am.T @ Ap) - beta * (np.diag(M)[:, None] - M)
    try:
        factor = linalg.cho_factor(gram, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "normal matrix of the weight solve is singular (alpha = 0 with rank-deficient PU?)"
        ) from exc
    return linalg.cho_solve(factor, rhs)


def project_weights(W_hat) -> np.ndarray:
    """Symmetrise, clamp at zero, then zero the diagonal."""
    W_hat = np.asarray(W_hat, dtype=np.float64)
    W = np.maximum(0.5 * (W_hat + W_hat.T), 0.0)
    np.fill_diagonal(W, 0.0)
    return W
