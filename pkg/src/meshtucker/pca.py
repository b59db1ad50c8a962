"""PCA key-frame compression, the baseline HO-SVD is compared against.

Frames are rows: each ``K x 3`` frame is flattened vertex by vertex into a
row of length ``3K``, giving an ``F x 3K`` data matrix. Rows are centred by
their mean and the leading principal directions of the centred matrix are
kept together with per-frame coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, RankError
from .tensor import Tensor3, as_tensor3

__all__ = [
    "PcaModel",
    "frames_as_rows",
    "rows_as_frames",
    "pca_compress",
    "pca_reconstruct",
    "pca_compression_ratio",
    "pca_mean_overhead",
    "nearest_pca_components",
]


@dataclass(frozen=True)
class PcaModel:
    """Retained principal directions, coefficients and the row mean.

    ``components`` is ``p' x 3K`` with orthonormal rows, ``coefficients`` is
    ``F x p'`` and ``eigenvalues`` holds every eigenvalue of the (unscaled)
    scatter matrix, largest first.
    """

    components: np.ndarray
    coefficients: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray

    @property
    def kept(self) -> int:
        return self.components.shape[0]

    @property
    def tail_energy(self) -> float:
        return float(np.sum(self.eigenvalues[self.kept :]))


def frames_as_rows(x) -> np.ndarray:
    """``K x 3 x F`` tensor to ``F x 3K`` matrix (vertex-major rows)."""
    arr = as_tensor3(x).array
    k, j, f = arr.shape
    return np.ascontiguousarray(np.transpose(arr, (2, 0, 1)).reshape(f, k * j))


def rows_as_frames(mat, dims) -> Tensor3:
    k, j, f = dims
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape != (f, k * j):
        raise DimensionMismatchError("frame matrix shape", (f, k * j), mat.shape)
    return Tensor3(np.transpose(mat.reshape(f, k, j), (1, 2, 0)))


def pca_compress(x, p_prime) -> PcaModel:
    """Keep ``p_prime`` principal components of the frames of ``x``."""
    mat = frames_as_rows(x)
    n_rows, n_cols = mat.shape
    if not 1 <= p_prime <= min(n_rows, n_cols):
        raise RankError(f"p' = {p_prime} outside [1, {min(n_rows, n_cols)}]")
    mean = mat.mean(axis=0)
    centred = mat - mean
    # Right singular vectors of the centred data are the scatter-matrix
    # eigenvectors; squared singular values are its eigenvalues.
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    components = vt[:p_prime]
    coefficients = centred @ components.T
    return PcaModel(components, coefficients, mean, s * s)


def pca_reconstruct(m: PcaModel, dims) -> Tensor3:
    dims = tuple(int(d) for d in dims)
    k, j, f = dims
    if m.components.shape[1] != k * j or m.coefficients.shape[0] != f:
        raise DimensionMismatchError(
            "model does not match dims", (f, k * j), (m.coefficients.shape[0], m.components.shape[1])
        )
    return rows_as_frames(m.mean + m.coefficients @ m.components, dims)


def pca_compression_ratio(p_prime, K, F, J=3) -> float:
    """``(K*J + F) * p' / (K*F*J)``; the mean row is accounted separately."""
    for name, value in (("p'", p_prime), ("K", K), ("F", F), ("J", J)):
        if value < 1:
            raise ValueError(f"{name} must be at least 1, got {value}")
    return (K * J + F) * p_prime / (K * F * J)


def pca_mean_overhead(K, F, J=3) -> float:
    """Storage of the mean row relative to the raw animation."""
    return K * J / (K * F * J)


def nearest_pca_components(K, F, lam, J=3) -> int:
    """Component count whose PCA compression ratio is closest to ``lam``."""
    unit = pca_compression_ratio(1, K, F, J)
    upper = min(F, K * J)
    candidates = np.arange(1, upper + 1)
    return int(candidates[np.argmin(np.abs(candidates * unit - lam))])
