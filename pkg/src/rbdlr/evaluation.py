"""Feature extraction, 1-NN classification, cosine K-means and clustering metrics."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .core import FitResult, InvalidInputError

CLUSTER_INPUTS = ("uz", "x", "u", "pu")


def salient_features(P, X) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if P.ndim != 2 or X.ndim != 2 or P.shape[1] != X.shape[0]:
        raise InvalidInputError(f"cannot project X {X.shape} with P {P.shape}")
    return P @ X


def clustering_input(result: FitResult, X, which: str = "uz") -> np.ndarray:
    """Matrix handed to K-means: principal features U Z (default), raw X,
    clean data U = X - E, or salient features P U."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape != result.E.shape:
        raise InvalidInputError(f"data shape {X.shape} does not match the model {result.E.shape}")
    U = X - result.E
    if which == "uz":
        return U @ result.Z
    if which == "x":
        return X
    if which == "u":
        return U
    if which == "pu":
        return result.P @ U
    raise InvalidInputError(f"unknown clustering input {which!r}; expected one of {CLUSTER_INPUTS}")


def knn1_classify(train_feats, train_labels, test_feats) -> np.ndarray:
    """Label each test column by its Euclidean-nearest training column.

    Ties go to the lowest training index.
    """
    train = np.asarray(train_feats, dtype=np.float64)
    test = np.asarray(test_feats, dtype=np.float64)
    train_labels = np.asarray(train_labels)
    if train.ndim != 2 or train.shape[1] == 0:
        raise InvalidInputError("training set is empty")
    if train_labels.shape != (train.shape[1],):
        raise InvalidInputError("need one training label per training column")
    if test.ndim != 2 or test.shape[0] != train.shape[0]:
        raise InvalidInputError(
            f"feature dimensions differ: train {train.shape[0]}, test {test.shape[0]}"
        )
    if test.shape[1] == 0:
        return train_labels[:0].copy()
    dist = cdist(test.T, train.T, metric="sqeuclidean")
    return train_labels[np.argmin(dist, axis=1)]


def _normalize_columns(F):
    norms = np.linalg.norm(F, axis=0)
    nonzero = norms > 0
    out = np.zeros_like(F)
    out[:, nonzero] = F[:, nonzero] / norms[nonzero]
    return out, nonzero


def _assign(Fn, nonzero, C, previous):
    sim = C.T @ Fn
    assign = np.argmax(sim, axis=0)
    assign[~nonzero] = previous[~nonzero]
    return assign


def _cost(Fn, nonzero, C, assign) -> float:
    cos = np.einsum("ij,ij->j", Fn[:, nonzero], C[:, assign[nonzero]])
    return float(np.sum(1.0 - cos))


def lloyd_cosine(F, init_idx, max_iter: int = 300):
    """One Lloyd run of spherical K-means from the given seed columns.

    Returns the final assignment and the cost after every assignment step.
    """
    F = np.asarray(F, dtype=np.float64)
    Fn, nonzero = _normalize_columns(F)
    N = F.shape[1]
    K = len(init_idx)
    C = Fn[:, init_idx].copy()
    assign = np.zeros(N, dtype=np.int64)
    assign = _assign(Fn, nonzero, C, assign)
    costs = [_cost(Fn, nonzero, C, assign)]
    for _ in range(max_iter):
        for j in range(K):
            members = assign == j
            members &= nonzero
            if members.any():
                c = Fn[:, members].sum(axis=1)
                norm = np.linalg.norm(c)
                if norm > 0:
                    C[:, j] = c / norm
                    continue
            # empty (or degenerate) cluster: reseed with the worst-fit sample
            cos = np.einsum("ij,ij->j", Fn, C[:, assign])
            cos[~nonzero] = np.inf
            far = int(np.argmin(cos))
            C[:, j] = Fn[:, far]
            assign[far] = j
        new_assign = _assign(Fn, nonzero, C, assign)
        costs.append(_cost(Fn, nonzero, C, new_assign))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return assign, costs


def kmeans_cosine(feats, K: int, restarts: int = 30, seed: int = 0, max_iter: int = 300):
    """K-means with cosine distance, best of ``restarts`` random initialisations.

    Each restart draws K distinct nonzero columns as seeds from its own
    PCG64 stream spawned from ``seed``. The assignment with the lowest final
    within-cluster cost ``sum(1 - cos(x, c))`` wins; ties keep the earlier
    restart.
    """
    F = np.asarray(feats, dtype=np.float64)
    if F.ndim != 2:
        raise InvalidInputError("features must be a 2-D matrix")
    N = F.shape[1]
    if K < 1 or K > N:
        raise InvalidInputError(f"K must lie in [1, {N}], got {K}")
    if restarts < 1:
        raise InvalidInputError("restarts must be positive")
    candidates = np.flatnonzero(np.linalg.norm(F, axis=0) > 0)
    if candidates.size < K:
        raise InvalidInputError(f"only {candidates.size} nonzero samples for K = {K}")

    best, best_cost = None, np.inf
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.Generator(np.random.PCG64(child))
        init = rng.choice(candidates, size=K, replace=False)
        assign, costs = lloyd_cosine(F, init, max_iter=max_iter)
        if costs[-1] < best_cost:
            best, best_cost = assign, costs[-1]
    return best


def _contingency(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.ndim != 1 or pred.shape != truth.shape:
        raise InvalidInputError(f"label vectors differ in shape: {pred.shape} vs {truth.shape}")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max(initial=-1) + 1, t.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def clustering_accuracy(pred, truth) -> float:
    """Best agreement rate over one-to-one matchings of clusters to classes."""
    table = _contingency(pred, truth)
    if table.size == 0:
        raise InvalidInputError("empty label vectors")
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / table.sum())


def _pairs(counts):
    counts = np.asarray(counts, dtype=np.int64)
    return int(np.sum(counts * (counts - 1) // 2))


def pairwise_f_score(pred, truth) -> float:
    """F1 over sample pairs that share a cluster and/or a class."""
    table = _contingency(pred, truth)
    if table.sum() < 2:
        raise InvalidInputError("need at least two samples")
    tp = _pairs(table)
    same_pred = _pairs(table.sum(axis=1))
    same_truth = _pairs(table.sum(axis=0))
    precision = tp / same_pred if same_pred else 0.0
    recall = tp / same_truth if same_truth else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def block_energy_ratio(W, labels) -> float:
    """Share of the total |W| mass sitting on same-label pairs."""
    W = np.abs(np.asarray(W, dtype=np.float64))
    labels = np.asarray(labels)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or labels.shape != (W.shape[0],):
        raise InvalidInputError("W must be N x N with N labels")
    total = W.sum()
    if not total > 0:
        raise InvalidInputError("block energy ratio is undefined for a zero weight matrix")
    same = labels[:, None] == labels[None, :]
    return float(W[same].sum() / total)


def within_between_ratio(W, labels) -> float:
    """Mean off-diagonal within-block weight over mean between-block weight."""
    W = np.asarray(W, dtype=np.float64)
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(W.shape[0], dtype=bool)
    within = W[same & off]
    between = W[~same]
    if within.size == 0 or between.size == 0:
        raise InvalidInputError("need at least two classes and a class with two samples")
    b = between.mean()
    if b == 0:
        return np.inf if within.mean() > 0 else np.nan
    return float(within.mean() / b)
