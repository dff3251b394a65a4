import numpy as np
import pytest

from rbdlr import Dataset, Hyperparams, Mode, SolverDivergenceError, SolverState, fit, fit_fllrr
from rbdlr.solver import (
    column_shrink,
    update_bias,
    update_coefficients,
    update_error,
    update_multipliers,
    update_projection,
)

import oracles


def make_state(s):
    n, N = s["U"].shape
    state = SolverState.initial(s["U"], s["mu"])
    state.Z, state.P, state.W = s["Z"], s["P"], s["W"]
    state.theta, state.Y1 = s["theta"], s["Y1"]
    return state


def hp_of(s):
    return Hyperparams(alpha=s["alpha"], beta=s["beta"], gamma=0.1, k=2)


def subproblem(state, hp, **override):
    args = dict(
        Z=state.Z, P=state.P, W=state.W, theta=state.theta, U=state.U, Y1=state.Y1,
        mu=state.mu, alpha=hp.alpha, beta=hp.beta,
    )
    args.update(override)
    return oracles.coupling_objective(**args)


def test_update_coefficients_examples():
    n, N = 3, 4
    state = SolverState.initial(np.zeros((n, N)), 1.0)
    assert np.array_equal(update_coefficients(state, Hyperparams(k=1)), np.zeros((N, N)))
    W = oracles.random_feasible_weights(np.random.default_rng(0), N)
    state.W = W
    Z = update_coefficients(state, Hyperparams(alpha=1.0, k=1))
    # (2 + 2 alpha) Z = 2 alpha W with alpha = 1
    assert np.allclose(Z, 2 * 1.0 * W / (2 + 2 * 1.0))
    assert np.allclose(Z, W / 2)


@pytest.mark.parametrize("seed", range(10))
def test_update_coefficients_optimal(seed):
    s = oracles.random_small_state(np.random.default_rng(seed))
    state, hp = make_state(s), hp_of(s)
    Z = update_coefficients(state, hp)
    assert oracles.relative_gradient(lambda z: subproblem(state, hp, Z=z), Z) <= 1e-6


def test_update_projection_examples():
    n, N = 3, 4
    state = SolverState.initial(np.zeros((n, N)), 2.0)
    assert np.array_equal(update_projection(state, Hyperparams(k=1)), np.zeros((n, n)))

    U = np.random.default_rng(1).standard_normal((n, N))
    state = SolverState.initial(U, 0.7)
    P = update_projection(state, Hyperparams(alpha=1.0, beta=0.0, k=1))
    UUt = U @ U.T
    expected = np.linalg.solve((0.7 * UUt + 2 * np.eye(n)).T, (0.7 * UUt).T).T
    assert np.allclose(P, expected, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_update_projection_optimal(seed):
    s = oracles.random_small_state(np.random.default_rng(seed))
    state, hp = make_state(s), hp_of(s)
    P = update_projection(state, hp)
    assert oracles.relative_gradient(lambda p: subproblem(state, hp, P=p), P) <= 1e-6


def test_update_bias_examples():
    W = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.array_equal(update_bias(W, W), np.zeros((2, 1)))
    assert np.allclose(update_bias(W, np.zeros((2, 2))).ravel(), [0.5, 0.5])
    rng = np.random.default_rng(0)
    Z, D = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    assert np.allclose(update_bias(W + D, Z + D), update_bias(W, Z), atol=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_update_bias_optimal(seed):
    s = oracles.random_small_state(np.random.default_rng(seed))
    state, hp = make_state(s), hp_of(s)
    theta = update_bias(state.W, state.Z)
    assert oracles.relative_gradient(lambda t: subproblem(state, hp, theta=t), theta) <= 1e-6


def test_column_shrink_examples():
    T = np.array([[3.0, 0.1], [4.0, 0.1]])
    out = column_shrink(T, 1.0)
    assert np.allclose(out[:, 0], [2.4, 3.2])
    assert np.allclose(oracles.prox_grid(T[:, 0], 1.0), [2.4, 3.2], atol=1e-9)
    assert np.array_equal(out[:, 1], [0.0, 0.0])
    assert np.array_equal(column_shrink(T, 0.0), T)
    # norm exactly at the threshold goes to zero
    assert np.array_equal(column_shrink(np.array([[3.0], [4.0]]), 5.0), np.zeros((2, 1)))


@pytest.mark.parametrize("seed", range(5))
def test_column_shrink_properties(seed):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((6, 20)) * rng.uniform(0.1, 5, size=20)
    tau = rng.uniform(0, 3)
    out = column_shrink(T, tau)
    assert (np.linalg.norm(out, axis=0) <= np.linalg.norm(T, axis=0) + 1e-15).all()
    for j in range(T.shape[1]):
        # nonnegative multiple of the input column
        c = out[:, j] @ T[:, j] / (T[:, j] @ T[:, j])
        assert c >= 0
        assert np.allclose(out[:, j], c * T[:, j], atol=1e-14)


def test_update_error_zero_residual():
    rng = np.random.default_rng(0)
    n, N = 6, 5
    X = rng.standard_normal((n, N))
    state = SolverState.initial(X, 1.0)
    # X = X Z + P X with Z = I/2, P = I/2
    state.Z = np.eye(N) / 2
    state.P = np.eye(n) / 2
    E, U = update_error(X, state, Hyperparams(gamma=1e-3, k=1))
    assert np.allclose(E, 0) and np.allclose(U, X)


def test_update_error_full_shrinkage():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((4, 6))
    state = SolverState.initial(X, 1e-6)
    E, U = update_error(X, state, Hyperparams(gamma=1e-2, k=1))
    assert np.array_equal(E, np.zeros_like(X))
    assert np.array_equal(U, X)


def test_update_error_isolates_gross_column():
    rng = np.random.default_rng(2)
    n, N = 10, 6
    basis = np.linalg.qr(rng.standard_normal((n, 2)))[0]
    clean = basis @ rng.standard_normal((2, N))
    X = clean.copy()
    X[:, 3] += 100 * rng.standard_normal(n)
    state = SolverState.initial(clean, 1.0)
    # exact self-representation of the clean data: Z = V V^T, P = 0
    V = np.linalg.svd(clean, full_matrices=False)[2][:2].T
    state.Z = V @ V.T
    tau = 0.5
    E, U = update_error(X, state, Hyperparams(gamma=tau, k=1))
    theta = X - (clean @ state.Z)
    for j in range(N):
        assert np.allclose(E[:, j], oracles.prox_grid(theta[:, j], tau), atol=1e-6)
    assert np.linalg.norm(E[:, 3]) > 0
    assert np.all(E[:, [0, 1, 2, 4, 5]] == 0)
    assert np.array_equal(U, X - E)


def test_update_multipliers():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((3, 4))
    state = SolverState.initial(X, 1e-6)
    hp = Hyperparams(k=1)
    state.Z = rng.standard_normal((4, 4))
    Y1, Y2, mu = update_multipliers(X, state, hp)
    assert mu == pytest.approx(1.12e-6, rel=1e-15)
    assert np.allclose(Y1, 1e-6 * (X - X @ state.Z))
    assert np.array_equal(Y2, np.zeros_like(X))

    state.mu = hp.mu_max
    assert update_multipliers(X, state, hp)[2] == hp.mu_max

    state = SolverState.initial(X, 0.5)
    state.Z = np.eye(4)
    state.Y1 = rng.standard_normal((3, 4))
    Y1, Y2, _ = update_multipliers(X, state, hp)
    assert np.array_equal(Y1, state.Y1) and np.array_equal(Y2, state.Y2)


@pytest.fixture(scope="module")
def small_data():
    rng = np.random.default_rng(7)
    bases = [np.linalg.qr(rng.standard_normal((30, 3)))[0] for _ in range(3)]
    X = np.hstack([B @ rng.standard_normal((3, 5)) for B in bases])
    return Dataset(X, np.repeat(np.arange(3), 5))


def test_fit_iterate_invariants(small_data):
    X = small_data.X
    hp = Hyperparams(max_iter=150)
    seen = []

    def check(state):
        assert np.array_equal(state.U, X - state.E)
        assert np.array_equal(state.Y2, np.zeros_like(X))
        W = state.W
        assert np.array_equal(W, W.T) and (W >= 0).all() and (np.diag(W) == 0).all()
        M = state.M
        ev = np.linalg.eigvalsh(M)
        assert np.trace(M) == pytest.approx(3, abs=1e-8)
        assert ev.min() >= -1e-8 and ev.max() <= 1 + 1e-8
        seen.append(state.mu)

    result = fit(small_data, hp, callback=check)
    rep = result.report
    assert len(seen) == rep.iterations
    assert all(b >= a for a, b in zip(seen, seen[1:]))
    assert max(seen) <= hp.mu_max
    assert len(rep.residual_history) == len(rep.objective_history) == rep.iterations
    assert all(r2 == 0.0 for _, r2 in rep.residual_history)
    assert rep.converged == (max(rep.residual_history[-1]) < hp.eps)
    assert result.Z.shape == (15, 15) and result.P.shape == (30, 30)
    assert result.theta.shape == (15, 1)


def test_fit_deterministic(small_data):
    hp = Hyperparams(max_iter=60)
    a = fit(small_data, hp, threads=1)
    b = fit(small_data, hp, threads=1)
    for name in ("Z", "P", "E", "W", "theta"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.report.residual_history == b.report.residual_history
    assert a.report.objective_history == b.report.objective_history


def test_fit_large_gamma_keeps_error_zero(small_data):
    def check(state):
        assert not state.E.any()

    fit(small_data, Hyperparams(gamma=1e3, max_iter=200), callback=check)


def test_fit_needs_k_without_labels(small_data):
    from rbdlr import InvalidInputError

    with pytest.raises(InvalidInputError):
        fit(Dataset(small_data.X), Hyperparams(max_iter=2))


def test_fit_fllrr(small_data):
    r = fit_fllrr(small_data, Hyperparams(gamma=0.05, max_iter=80))
    assert not r.W.any() and not r.theta.any()
    direct = fit(small_data, Hyperparams(alpha=0.0, beta=0.0, gamma=0.05, max_iter=80, mode=Mode.FLLRR))
    assert np.array_equal(r.Z, direct.Z) and np.array_equal(r.E, direct.E)
    assert r.report.objective_history == direct.report.objective_history


def test_fllrr_objective_history(small_data):
    gamma = 0.05
    expected = []

    def record(state):
        expected.append(np.sum(state.Z**2) + np.sum(state.P**2) + gamma * oracles.l21_loop(state.E))

    r = fit_fllrr(small_data, Hyperparams(gamma=gamma, max_iter=40), callback=record)
    assert np.allclose(r.report.objective_history, expected, rtol=1e-12, atol=1e-12)


def test_fit_divergence_reported():
    X = np.array([[1e200, -1e200], [1e200, 1e200]])
    with pytest.raises(SolverDivergenceError) as info:
        fit(Dataset(X), Hyperparams(k=1, mu0=1.0, max_iter=5))
    assert info.value.iteration >= 1
    assert "iteration" in str(info.value)
