"""HO-SVD (Tucker) decomposition, truncation and reconstruction.

Singular values are kept in descending order, so the energy of the core
tensor sits at low indices and truncation keeps the leading block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DecompositionError, DimensionMismatchError, InvalidModeError, RankError
from .tensor import Tensor3, as_tensor3, mode_multiply, unfold

__all__ = [
    "TuckerOperator",
    "TruncatedTucker",
    "hosvd",
    "truncate",
    "reconstruct",
    "core_orthogonality_defect",
    "core_slice_norms",
    "complete_basis",
]

# Relative energy below which a core slice is treated as numerically null
# in the all-orthogonality diagnostic.
_DEFECT_GUARD = 1e-6


@dataclass(frozen=True)
class TuckerOperator:
    """Core tensor plus one factor matrix per mode.

    With ``full_matrices=True`` (the default of :func:`hosvd`) each factor
    is square and orthogonal. Thin operators keep only the columns spanning
    the unfolding, and the core is shaped accordingly.
    """

    core: Tensor3
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]
    singular_values: tuple[np.ndarray, np.ndarray, np.ndarray]
    original_dims: tuple[int, int, int]

    @property
    def is_full(self) -> bool:
        return all(u.shape[0] == u.shape[1] for u in self.factors)


@dataclass(frozen=True)
class TruncatedTucker:
    core: Tensor3
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]
    ranks: tuple[int, int, int]
    original_dims: tuple[int, int, int]

    def __post_init__(self):
        for k in range(3):
            u = self.factors[k]
            if u.shape != (self.original_dims[k], self.ranks[k]):
                raise DimensionMismatchError(
                    f"factor {k + 1} shape", (self.original_dims[k], self.ranks[k]), u.shape
                )
        if self.core.dims != tuple(self.ranks):
            raise DimensionMismatchError("core dims", tuple(self.ranks), self.core.dims)


def complete_basis(u, n_cols):
    """Extend orthonormal columns ``u`` to ``n_cols`` orthonormal columns.

    A full completion takes the trailing columns of a Householder QR of
    ``u``. A partial one orthogonalizes canonical unit vectors, in index
    order, against the current basis (twice) and keeps those retaining at
    least half their norm. Both routes are deterministic for a given ``u``.
    """
    u = np.asarray(u, dtype=np.float64)
    n, have = u.shape
    if n_cols > n:
        raise RankError(f"cannot build {n_cols} orthonormal columns in dimension {n}")
    if have >= n_cols:
        return u[:, :n_cols]
    if n_cols == n or have == 0:
        q, _ = np.linalg.qr(u if have else np.zeros((n, 1)), mode="complete")
        out = np.empty((n, n_cols))
        out[:, :have] = u
        out[:, have:] = q[:, have : have + n_cols - have] if have else np.eye(n)[:, :n_cols]
        return out
    out = np.empty((n, n_cols))
    out[:, :have] = u
    filled = have
    for j in range(n):
        if filled == n_cols:
            break
        e = np.zeros(n)
        e[j] = 1.0
        basis = out[:, :filled]
        for _ in range(2):
            e -= basis @ (basis.T @ e)
        norm = np.linalg.norm(e)
        if norm > 0.5:
            out[:, filled] = e / norm
            filled += 1
    return out


def _left_singular(mat, full):
    try:
        u, s, _ = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD did not converge: {exc}") from exc
    if full and u.shape[1] < mat.shape[0]:
        u = complete_basis(u, mat.shape[0])
    return u, s


def hosvd(t, full_matrices=True) -> TuckerOperator:
    """Higher-order SVD of a 3-mode tensor.

    Each factor holds the left singular vectors of the matching unfolding,
    ordered by descending singular value, and the core is
    ``t x_1 U1^T x_2 U2^T x_3 U3^T``. When a mode is longer than its
    unfolding's rank the missing columns are completed deterministically
    (see :func:`complete_basis`). ``full_matrices=False`` skips that
    completion, which keeps memory linear in the longest mode.

    An all-zero tensor yields a zero core and arbitrary orthogonal factors.
    """
    t = as_tensor3(t)
    if t.size == 0:
        raise ValueError("hosvd needs a non-empty tensor")
    factors = []
    svals = []
    for mode in (1, 2, 3):
        u, s = _left_singular(unfold(t, mode).data, full_matrices)
        u.setflags(write=False)
        s.setflags(write=False)
        factors.append(u)
        svals.append(s)
    core = t
    for mode, u in zip((1, 2, 3), factors):
        core = mode_multiply(core, u.T, mode)
    return TuckerOperator(core, tuple(factors), tuple(svals), t.dims)


def _check_ranks(ranks, dims):
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != 3:
        raise RankError(f"expected three ranks, got {ranks}")
    for k, (r, d) in enumerate(zip(ranks, dims)):
        if not 1 <= r <= d:
            raise RankError(f"rank {r} for mode {k + 1} outside [1, {d}]")
    return ranks


def truncate(op: TuckerOperator, ranks) -> TruncatedTucker:
    """Keep the leading ``ranks`` block of the core and matching factor columns.

    A thin operator is completed on demand: extra factor columns come from
    :func:`complete_basis` and their core entries are zero.
    """
    ranks = _check_ranks(ranks, op.original_dims)
    factors = []
    for k in range(3):
        u = op.factors[k]
        if ranks[k] > u.shape[1]:
            u = complete_basis(u, ranks[k])
        factors.append(np.ascontiguousarray(u[:, : ranks[k]]))
    core = op.core.array
    avail = tuple(min(r, c) for r, c in zip(ranks, core.shape))
    block = np.zeros(ranks)
    block[: avail[0], : avail[1], : avail[2]] = core[: avail[0], : avail[1], : avail[2]]
    return TruncatedTucker(Tensor3(block), tuple(factors), ranks, op.original_dims)


def reconstruct(tt: TruncatedTucker) -> Tensor3:
    """``core x_1 U1 x_2 U2 x_3 U3``."""
    out = tt.core
    for mode, u in zip((1, 2, 3), tt.factors):
        out = mode_multiply(out, u, mode)
    if out.dims != tuple(tt.original_dims):
        raise DimensionMismatchError("reconstruction dims", tuple(tt.original_dims), out.dims)
    return out


def _slice_gram(op, l):
    if l not in (1, 2, 3):
        raise InvalidModeError(f"mode must be 1, 2 or 3, got {l!r}")
    mat = unfold(op.core, l).data
    return mat @ mat.T


def core_orthogonality_defect(op: TuckerOperator, l) -> float:
    """Largest normalized scalar product between distinct mode-``l`` core slices.

    Each pair is scored ``|<C_a, C_b>| / (|C_a| |C_b| + eps)`` where
    ``eps = 1e-6 * |C|^2``, so slices carrying a negligible share of the
    energy (round-off in completed directions) cannot dominate.
    """
    gram = _slice_gram(op, l)
    n = gram.shape[0]
    if n < 2:
        return 0.0
    norms = np.sqrt(np.clip(np.diag(gram), 0.0, None))
    eps = _DEFECT_GUARD * float(np.sum(norms**2)) + np.finfo(float).tiny
    scaled = np.abs(gram) / (np.outer(norms, norms) + eps)
    np.fill_diagonal(scaled, 0.0)
    return float(scaled.max())


def core_slice_norms(op: TuckerOperator, l) -> np.ndarray:
    """Frobenius norms of the mode-``l`` core slices, index 0 first."""
    gram = _slice_gram(op, l)
    return np.sqrt(np.clip(np.diag(gram), 0.0, None))
