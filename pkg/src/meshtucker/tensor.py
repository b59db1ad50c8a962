"""Dense 3-mode tensors and the multilinear operations HO-SVD needs.

Linear layout
-------------
``Tensor3.data`` is the flat array with the mode-1 index varying fastest
(column-major / Fortran order): entry ``(i1, i2, i3)`` sits at
``i1 + I1 * (i2 + I2 * i3)``. The same convention fixes the column order of
every unfolding: in ``unfold(t, l)`` the remaining modes are enumerated in
increasing mode order with the lowest one varying fastest. For a ``K x 3 x F``
animation tensor, ``unfold(t, 1)`` therefore has column ``j + 3 * k`` for
coordinate ``j`` of frame ``k``.

All indices are 0-based and modes are numbered 1, 2, 3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, InvalidModeError

__all__ = [
    "Tensor3",
    "UnfoldedMatrix",
    "as_tensor3",
    "mode_multiply",
    "unfold",
    "fold",
    "sub_tensor",
    "inner_product",
    "frobenius_norm",
]


class Tensor3:
    """Immutable dense real tensor with exactly three modes.

    Parameters
    ----------
    array : array_like
        Values of shape ``(I1, I2, I3)``. Copied and converted to float64.
    """

    __slots__ = ("_array",)

    def __init__(self, array):
        arr = np.array(array, dtype=np.float64, copy=True)
        if arr.ndim != 3:
            raise DimensionMismatchError("Tensor3 needs a 3-dimensional array", 3, arr.ndim)
        if not np.all(np.isfinite(arr)):
            raise ValueError("Tensor3 entries must be finite")
        arr.setflags(write=False)
        self._array = arr

    @classmethod
    def from_data(cls, data, dims) -> Tensor3:
        """Build from a flat array in the mode-1-fastest layout."""
        data = np.asarray(data, dtype=np.float64).ravel()
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3:
            raise DimensionMismatchError("dims must have three entries", 3, len(dims))
        if data.size != int(np.prod(dims)):
            raise DimensionMismatchError("data length does not match dims", int(np.prod(dims)), data.size)
        return cls(data.reshape(dims, order="F"))

    @classmethod
    def zeros(cls, dims) -> Tensor3:
        return cls(np.zeros(tuple(int(d) for d in dims)))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self._array.shape

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._array.shape

    @property
    def size(self) -> int:
        return self._array.size

    @property
    def array(self) -> np.ndarray:
        """Read-only ndarray view indexed ``[i1, i2, i3]``."""
        return self._array

    @property
    def data(self) -> np.ndarray:
        """Flat copy in the mode-1-fastest layout."""
        return self._array.ravel(order="F")

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._array
        return self._array.astype(dtype)

    def __repr__(self):
        return f"Tensor3(dims={self.dims})"


def as_tensor3(t) -> Tensor3:
    if isinstance(t, Tensor3):
        return t
    return Tensor3(t)


def _check_mode(l) -> int:
    if l not in (1, 2, 3):
        raise InvalidModeError(f"mode must be 1, 2 or 3, got {l!r}")
    return l - 1


def mode_multiply(t, m, l) -> Tensor3:
    """Mode-``l`` product ``t x_l m``.

    ``m`` has shape ``(D, I_l)``: its columns contract against mode ``l`` and
    the result has ``D`` in place of ``I_l``, i.e.
    ``out[.., d, ..] = sum_i t[.., i, ..] * m[d, i]``.
    """
    t = as_tensor3(t)
    ax = _check_mode(l)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatchError("mode_multiply needs a matrix", 2, m.ndim)
    if m.shape[1] != t.dims[ax]:
        raise DimensionMismatchError(
            f"matrix columns must match mode-{l} size", t.dims[ax], m.shape[1]
        )
    out = np.tensordot(m, t.array, axes=([1], [ax]))
    return Tensor3(np.moveaxis(out, 0, ax))


@dataclass(frozen=True)
class UnfoldedMatrix:
    """Mode-``mode`` unfolding of a :class:`Tensor3`."""

    mode: int
    data: np.ndarray

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def unfold(t, l) -> UnfoldedMatrix:
    """Matricize ``t`` along mode ``l`` (row index = mode-``l`` index)."""
    t = as_tensor3(t)
    ax = _check_mode(l)
    mat = np.moveaxis(t.array, ax, 0).reshape(t.dims[ax], -1, order="F")
    mat.setflags(write=False)
    return UnfoldedMatrix(l, mat)


def fold(m, dims) -> Tensor3:
    """Inverse of :func:`unfold` for a tensor of shape ``dims``."""
    if not isinstance(m, UnfoldedMatrix):
        raise TypeError("fold expects an UnfoldedMatrix")
    ax = _check_mode(m.mode)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise DimensionMismatchError("dims must have three entries", 3, len(dims))
    rest = tuple(d for i, d in enumerate(dims) if i != ax)
    expected = (dims[ax], rest[0] * rest[1])
    if m.data.shape != expected:
        raise DimensionMismatchError(f"mode-{m.mode} unfolding shape", expected, m.data.shape)
    arr = np.asarray(m.data).reshape((dims[ax],) + rest, order="F")
    return Tensor3(np.moveaxis(arr, 0, ax))


def sub_tensor(t, l, alpha) -> Tensor3:
    """Slice with the mode-``l`` index fixed at ``alpha`` (that mode keeps size 1)."""
    t = as_tensor3(t)
    ax = _check_mode(l)
    alpha = int(alpha)
    if not 0 <= alpha < t.dims[ax]:
        raise IndexError(f"index {alpha} out of range for mode {l} of size {t.dims[ax]}")
    idx = [slice(None)] * 3
    idx[ax] = slice(alpha, alpha + 1)
    return Tensor3(t.array[tuple(idx)])


def inner_product(a, b) -> float:
    a = as_tensor3(a)
    b = as_tensor3(b)
    if a.dims != b.dims:
        raise DimensionMismatchError("inner product needs equal dims", a.dims, b.dims)
    return float(np.dot(a.array.ravel(), b.array.ravel()))


def frobenius_norm(t) -> float:
    t = as_tensor3(t)
    return float(np.sqrt(inner_product(t, t)))
