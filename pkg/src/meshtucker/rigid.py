"""Per-frame affine motion estimation and removal.

Each frame ``i`` of a ``K x 3 x F`` animation gets a 3x4 affine transform
``R_i = [A_i | b_i]`` fitted by least squares so that
``T[:, :, i] ~ T[:, :, 0] @ A_i.T + b_i``. Normalization pulls every frame back
into frame-0 coordinates, ``X_i = (T_i - b_i) @ inv(A_i).T``, and restoration
applies ``R_i`` again.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatchError, SingularTransformError
from .tensor import Tensor3, as_tensor3

__all__ = [
    "FrameTransform",
    "TransformSequence",
    "DegenerateGeometryWarning",
    "fit_affine",
    "estimate_rigid_motion",
    "apply_transforms",
    "apply_inverse_transforms",
]

# Linear blocks with a worse condition number are treated as singular.
MAX_CONDITION = 1e12


class DegenerateGeometryWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FrameTransform:
    """3x4 affine map acting on homogeneous row vectors."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (3, 4):
            raise DimensionMismatchError("affine transform shape", (3, 4), m.shape)
        if not np.all(np.isfinite(m)):
            raise ValueError("transform entries must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> FrameTransform:
        return cls(np.hstack([np.eye(3), np.zeros((3, 1))]))

    @property
    def linear(self) -> np.ndarray:
        return self.matrix[:, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:, 3]

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.linear))

    def is_singular(self) -> bool:
        c = self.condition
        return not np.isfinite(c) or c > MAX_CONDITION

    def apply(self, points) -> np.ndarray:
        return np.asarray(points) @ self.linear.T + self.translation

    def apply_inverse(self, points) -> np.ndarray:
        return np.linalg.solve(self.linear, (np.asarray(points) - self.translation).T).T


@dataclass(frozen=True)
class TransformSequence:
    """Frame-0-to-frame-``i`` transforms; ``transforms[0]`` is the identity.

    ``degenerate_frames`` lists frames where the affine fit was replaced by a
    translation-only transform.
    """

    transforms: tuple[FrameTransform, ...]
    degenerate_frames: tuple[int, ...] = field(default=())

    def __len__(self):
        return len(self.transforms)

    def __getitem__(self, i):
        return self.transforms[i]

    def as_array(self) -> np.ndarray:
        """``F x 12`` array, each row a row-major 3x4 matrix."""
        return np.stack([tr.matrix.ravel() for tr in self.transforms])

    @classmethod
    def from_array(cls, arr) -> TransformSequence:
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 12:
            raise DimensionMismatchError("transform array shape", ("F", 12), arr.shape)
        return cls(tuple(FrameTransform(row.reshape(3, 4)) for row in arr))

    @classmethod
    def identity(cls, n_frames) -> TransformSequence:
        return cls(tuple(FrameTransform.identity() for _ in range(n_frames)))


def fit_affine(source, target):
    """Least-squares ``[A | b]`` with ``target ~ source @ A.T + b``.

    Returns ``None`` when the source points do not span 3D (the normal
    equations are rank deficient).
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    centroid_s = source.mean(axis=0)
    centroid_t = target.mean(axis=0)
    cs = source - centroid_s
    ct = target - centroid_t
    # Centering decouples the translation and conditions the solve.
    sol, _, rank, sv = np.linalg.lstsq(cs, ct, rcond=None)
    if rank < 3 or sv[-1] <= sv[0] * 1e-10:
        return None
    a = sol.T
    b = centroid_t - a @ centroid_s
    return np.hstack([a, b[:, None]])


def estimate_rigid_motion(t):
    """Estimate per-frame affine motion and return ``(X, transforms)``.

    ``X`` is the animation expressed in frame-0 coordinates. Frames whose fit
    is degenerate (coplanar or collinear frame-0 vertices, or a fitted map
    with a singular linear block) fall back to a translation-only transform;
    they are listed in ``transforms.degenerate_frames`` and reported through
    a :class:`DegenerateGeometryWarning`.
    """
    t = as_tensor3(t)
    k, j, f = t.dims
    if j != 3:
        raise DimensionMismatchError("animation tensors need 3 coordinates", 3, j)
    if k < 4:
        raise ValueError(f"affine motion estimation needs at least 4 vertices, got {k}")
    arr = t.array
    base = arr[:, :, 0]
    transforms = [FrameTransform.identity()]
    degenerate = []
    out = np.empty_like(arr)
    out[:, :, 0] = base
    for i in range(1, f):
        frame = arr[:, :, i]
        m = fit_affine(base, frame)
        tr = None if m is None else FrameTransform(m)
        if tr is None or tr.is_singular():
            shift = frame.mean(axis=0) - base.mean(axis=0)
            tr = FrameTransform(np.hstack([np.eye(3), shift[:, None]]))
            degenerate.append(i)
        transforms.append(tr)
        out[:, :, i] = tr.apply_inverse(frame)
    if degenerate:
        warnings.warn(
            f"affine fit degenerate for {len(degenerate)} frame(s); used translation only",
            DegenerateGeometryWarning,
            stacklevel=2,
        )
    return Tensor3(out), TransformSequence(tuple(transforms), tuple(degenerate))


def _check_frames(x, r):
    x = as_tensor3(x)
    if x.dims[1] != 3:
        raise DimensionMismatchError("animation tensors need 3 coordinates", 3, x.dims[1])
    if len(r) != x.dims[2]:
        raise DimensionMismatchError("frame count", x.dims[2], len(r))
    return x


def apply_inverse_transforms(x, r: TransformSequence) -> Tensor3:
    """Map normalized frames back to their original coordinates."""
    x = _check_frames(x, r)
    out = np.empty(x.dims)
    for i, tr in enumerate(r.transforms):
        if tr.is_singular():
            raise SingularTransformError(i)
        out[:, :, i] = tr.apply(x.array[:, :, i])
    return Tensor3(out)


def apply_transforms(t, r: TransformSequence) -> Tensor3:
    """Normalize ``t`` with already-estimated transforms."""
    t = _check_frames(t, r)
    out = np.empty(t.dims)
    for i, tr in enumerate(r.transforms):
        if tr.is_singular():
            raise SingularTransformError(i)
        out[:, :, i] = tr.apply_inverse(t.array[:, :, i])
    return Tensor3(out)
