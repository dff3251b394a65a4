"""Synthetic union-of-subspaces benchmark and Gaussian corruption.

All randomness comes from numpy's PCG64 bit generator seeded with the
given integer, so outputs are reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, InvalidInputError


@dataclass(frozen=True)
class SyntheticSpec:
    num_subspaces: int = 10
    ambient_dim: int = 200
    basis_dim: int = 10
    samples_per_subspace: int = 9
    seed: int = 0

    def __post_init__(self):
        for name in ("num_subspaces", "ambient_dim", "basis_dim", "samples_per_subspace"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be positive")
        if self.basis_dim > self.ambient_dim:
            raise InvalidInputError(
                f"basis_dim ({self.basis_dim}) exceeds ambient_dim ({self.ambient_dim})"
            )
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of SO(dim) via sign-corrected QR."""
    Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_orthonormal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((rows, cols)))
    return Q * np.sign(np.diag(R))


def subspace_bases(spec: SyntheticSpec, rng: np.random.Generator) -> list[np.ndarray]:
    """Bases H_1, G H_1, G^2 H_1, ... for one shared random rotation G."""
    G = random_rotation(spec.ambient_dim, rng)
    H = random_orthonormal(spec.ambient_dim, spec.basis_dim, rng)
    bases = [H]
    for _ in range(spec.num_subspaces - 1):
        H = G @ H
        bases.append(H)
    return bases


def generate_subspace_data(spec: SyntheticSpec = SyntheticSpec(), return_bases: bool = False):
    """Sample ``samples_per_subspace`` Gaussian combinations from each subspace.

    Column j of the returned ``X`` belongs to subspace ``labels[j]``; blocks
    are contiguous. With ``return_bases`` the list of bases is returned too.
    """
    rng = _rng(spec.seed)
    bases = subspace_bases(spec, rng)
    blocks = [
        H @ rng.standard_normal((spec.basis_dim, spec.samples_per_subspace)) for H in bases
    ]
    X = np.hstack(blocks)
    labels = np.repeat(np.arange(spec.num_subspaces), spec.samples_per_subspace)
    data = Dataset(X, labels)
    if return_bases:
        return data, bases
    return data


def add_gaussian_noise(X, variance: float, seed: int = 0, columns=None) -> np.ndarray:
    """Add i.i.d. N(0, variance) noise, optionally only to the given columns."""
    if variance < 0:
        raise InvalidInputError(f"variance must be nonnegative, got {variance}")
    X = np.asarray(X, dtype=np.float64)
    out = X.copy()
    if variance == 0:
        return out
    rng = _rng(seed)
    if columns is None:
        out += np.sqrt(variance) * rng.standard_normal(X.shape)
    else:
        columns = np.asarray(columns, dtype=np.int64)
        out[:, columns] += np.sqrt(variance) * rng.standard_normal((X.shape[0], columns.size))
    return out
