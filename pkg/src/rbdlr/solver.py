"""Inexact-ALM alternating optimiser for block-diagonal latent representation."""

from __future__ import annotations

import contextlib
import dataclasses
import logging
import time
from typing import Optional

import numpy as np
from scipy import linalg
from threadpoolctl import threadpool_limits

from .blockdiag import assemble_aux, laplacian, project_weights, solve_weights, update_fantope
from .core import (
    Dataset,
    FitReport,
    FitResult,
    Hyperparams,
    Mode,
    SolverDivergenceError,
    SolverState,
    objective_value,
)

logger = logging.getLogger(__name__)


def _spd_solve(A, B):
    return linalg.cho_solve(linalg.cho_factor(A, lower=True), B)


def update_coefficients(state: SolverState, hp: Hyperparams) -> np.ndarray:
    """Closed-form Z step.

    Solves ``(2 + 2 alpha) Z + mu U^T U Z = Psi`` where
    ``Psi = 2 alpha W + U^T Y1 + mu U^T U - mu U^T P U - 2 alpha theta 1^T``.
    ``P`` is whatever the state currently holds (the previous iterate inside
    ``fit``).
    """
    U, mu, a = state.U, state.mu, hp.alpha
    N = U.shape[1]
    UtU = U.T @ U
    psi = (
        2 * a * state.W
        + U.T @ state.Y1
        + mu * UtU
        - mu * (U.T @ (state.P @ U))
        - 2 * a * state.theta
    )
    system = (2 + 2 * a) * np.eye(N) + mu * UtU
    return _spd_solve(system, psi)


def update_projection(state: SolverState, hp: Hyperparams) -> np.ndarray:
    """Closed-form P step: ``P = (Y1 U^T + mu U U^T - mu U Z U^T)(Gamma + 2I)^-1``."""
    U, W, Z, mu, b = state.U, state.W, state.Z, state.mu, hp.beta
    n = U.shape[0]
    UUt = U @ U.T
    UW = U @ W
    gamma_mat = (2 * b + mu) * UUt - 4 * b * (UW @ U.T) + 2 * b * (UW @ UW.T)
    numer = state.Y1 @ U.T + mu * UUt - mu * (U @ Z) @ U.T
    # P A = B with A symmetric PD  <=>  A P^T = B^T
    system = gamma_mat + 2 * np.eye(n)
    system = 0.5 * (system + system.T)
    return _spd_solve(system, numer.T).T


def update_bias(W, Z) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    N = W.shape[0]
    return (W.sum(axis=1) - Z.sum(axis=1)).reshape(N, 1) / N


def column_shrink(Theta, tau: float) -> np.ndarray:
    """Proximal operator of ``tau * ||.||_{2,1}``, applied column by column."""
    Theta = np.asarray(Theta, dtype=np.float64)
    norms = np.linalg.norm(Theta, axis=0)
    keep = norms > tau
    scale = np.zeros_like(norms)
    scale[keep] = (norms[keep] - tau) / norms[keep]
    return Theta * scale


def update_error(X, state: SolverState, hp: Hyperparams):
    """Shrink the reconstruction residual into E and return (E, X - E)."""
    X = np.asarray(X, dtype=np.float64)
    U, mu = state.U, state.mu
    theta = X - (U @ state.Z + state.P @ U) + state.Y2 / mu
    E = column_shrink(theta, hp.gamma / mu)
    return E, X - E


def update_multipliers(X, state: SolverState, hp: Hyperparams):
    X = np.asarray(X, dtype=np.float64)
    U, mu = state.U, state.mu
    Y1 = state.Y1 + mu * (U - state.P @ U - U @ state.Z)
    Y2 = state.Y2 + mu * (X - state.E - U)
    return Y1, Y2, min(hp.eta * mu, hp.mu_max)


def residuals(X, state: SolverState) -> tuple[float, float]:
    U = state.U
    r1 = np.max(np.abs(U - U @ state.Z - state.P @ U))
    r2 = np.max(np.abs(X - state.E - U))
    return float(r1), float(r2)


def _guard(name: str, iteration: int, fn):
    """Evaluate ``fn()`` and fail with a divergence error on non-finite output."""
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            value = fn()
        except ValueError as exc:  # check_finite inside the factorisations
            raise SolverDivergenceError(iteration, name) from exc
    parts = value if isinstance(value, tuple) else (value,)
    if not all(np.all(np.isfinite(v)) for v in parts):
        raise SolverDivergenceError(iteration, name)
    return value


def step(X, state: SolverState, hp: Hyperparams, k: int) -> SolverState:
    """Run one full iteration in place and return ``state``."""
    it = state.iter + 1
    state.Z = _guard("Z", it, lambda: update_coefficients(state, hp))
    state.P = _guard("P", it, lambda: update_projection(state, hp))
    if hp.mode is Mode.RBDLR:
        state.theta = _guard("theta", it, lambda: update_bias(state.W, state.Z))
    state.E, state.U = _guard("E", it, lambda: update_error(X, state, hp))
    if hp.mode is Mode.RBDLR:
        state.M = _guard("M", it, lambda: update_fantope(laplacian(state.W), k))
        aux = assemble_aux(state.Z, state.theta, state.P, state.U, hp.alpha, hp.beta)
        state.W = _guard("W", it, lambda: project_weights(solve_weights(aux, state.M, hp.beta)))
    state.Y1, state.Y2, state.mu = _guard("Y", it, lambda: update_multipliers(X, state, hp))
    state.iter = it
    return state


def _thread_limit(threads: Optional[int]):
    if threads is None:
        return contextlib.nullcontext()
    return threadpool_limits(limits=threads)


def fit(
    data: Dataset,
    hp: Hyperparams = Hyperparams(),
    threads: Optional[int] = None,
    callback=None,
) -> FitResult:
    """Fit the model to the columns of ``data.X``.

    Parameters
    ----------
    data : Dataset
        Samples as columns. Labels, when present, only supply the default k.
    hp : Hyperparams
        With ``mode=FLLRR`` the weight, Fantope and bias steps are skipped and
        W, theta stay zero.
    threads : int, optional
        Cap on BLAS threads; ``1`` gives bitwise-reproducible runs.
    callback : callable, optional
        Called as ``callback(state)`` after every iteration.

    Returns
    -------
    FitResult
    """
    X = data.X
    k = hp.resolve_k(data) if hp.mode is Mode.RBDLR else (hp.k or 1)
    hp_eval = dataclasses.replace(hp, k=k)
    state = SolverState.initial(X, hp.mu0)
    report = FitReport(iterations=0, converged=False)

    start = time.perf_counter()
    with _thread_limit(threads):
        while state.iter < hp.max_iter:
            step(X, state, hp, k)
            r1, r2 = residuals(X, state)
            report.residual_history.append((r1, r2))
            report.objective_history.append(objective_value(X, state, hp_eval))
            if callback is not None:
                callback(state)
            if max(r1, r2) < hp.eps:
                report.converged = True
                break
    report.iterations = state.iter
    report.wall_time_seconds = time.perf_counter() - start
    logger.debug(
        "fit finished after %d iterations (converged=%s)", report.iterations, report.converged
    )
    return FitResult(
        Z=state.Z, P=state.P, E=state.E, W=state.W, theta=state.theta, report=report
    )


def fit_fllrr(data: Dataset, hp: Hyperparams = Hyperparams(), threads: Optional[int] = None,
              callback=None) -> FitResult:
    """Fit the Frobenius latent LRR special case (alpha = beta = 0)."""
    hp = dataclasses.replace(hp, alpha=0.0, beta=0.0, mode=Mode.FLLRR)
    return fit(data, hp, threads=threads, callback=callback)
