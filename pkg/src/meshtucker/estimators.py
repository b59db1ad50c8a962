"""scikit-learn style wrappers around the compression pipeline.

Every estimator takes a ``K x 3 x F`` vertex tensor as ``X``. Hyperparameters
live in ``__init__`` and fitted state in trailing-underscore attributes, so
``get_params``/``set_params``/``clone`` behave as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import codec, planning
from ._validation import check_animation_tensor, check_rank
from .decomposition import hosvd, reconstruct, truncate
from .exceptions import DimensionMismatchError
from .metrics import METRICS
from .pca import frames_as_rows, pca_compress, pca_compression_ratio, pca_reconstruct
from .rigid import (
    TransformSequence,
    apply_inverse_transforms,
    apply_transforms,
    estimate_rigid_motion,
)
from .tensor import Tensor3, mode_multiply

__all__ = ["RigidMotionNormalizer", "TuckerCompressor", "PCACompressor", "AnimationCodec"]


def _check_frames(arr, n_frames):
    if arr.shape[2] != n_frames:
        raise DimensionMismatchError("frame count differs from fit", n_frames, arr.shape[2])


class RigidMotionNormalizer(TransformerMixin, BaseEstimator):
    """Removes per-frame affine motion relative to frame 0."""

    def fit(self, X, y=None):
        arr = check_animation_tensor(X, min_vertices=4)
        _, self.transforms_ = estimate_rigid_motion(arr)
        self.degenerate_frames_ = tuple(self.transforms_.degenerate_frames)
        self.n_frames_ = arr.shape[2]
        return self

    def transform(self, X):
        check_is_fitted(self, "transforms_")
        arr = check_animation_tensor(X)
        _check_frames(arr, self.n_frames_)
        return apply_transforms(arr, self.transforms_).array

    def inverse_transform(self, X):
        check_is_fitted(self, "transforms_")
        arr = check_animation_tensor(X)
        _check_frames(arr, self.n_frames_)
        return apply_inverse_transforms(arr, self.transforms_).array


class TuckerCompressor(TransformerMixin, BaseEstimator):
    """Truncated HO-SVD with rank selection.

    Give either ``ranks=(v, f)`` or a ``target_cr``; with a target the ranks
    come from ``strategy``. ``transform`` projects onto the retained factors
    and returns the ``v x 3 x f`` core; ``inverse_transform`` maps a core back
    to vertex coordinates.
    """

    def __init__(self, ranks=None, target_cr=None, strategy="diagonal", metric="mse",
                 delta=planning.DEFAULT_DELTA, n_samples=planning.DEFAULT_SAMPLES,
                 depth_limit=planning.DEFAULT_DEPTH, normalize=True):
        self.ranks = ranks
        self.target_cr = target_cr
        self.strategy = strategy
        self.metric = metric
        self.delta = delta
        self.n_samples = n_samples
        self.depth_limit = depth_limit
        self.normalize = normalize

    def _validate_params(self):
        if (self.ranks is None) == (self.target_cr is None):
            raise ValueError("set exactly one of ranks and target_cr")
        if self.strategy not in ("diagonal", "iterative"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")

    def fit(self, X, y=None):
        self._validate_params()
        arr = check_animation_tensor(X, min_vertices=4 if self.normalize else 1)
        K, _, F = arr.shape
        if self.normalize:
            prepared = codec.prepare(arr)
        else:
            prepared = codec.PreparedAnimation(
                Tensor3(arr), Tensor3(arr), TransformSequence.identity(F),
                hosvd(arr, full_matrices=False), np.zeros((0, 2), dtype=np.int64),
            )
        if self.ranks is not None:
            v, f = self.ranks
            plan = planning.explicit_plan(check_rank(v, K, "v"), check_rank(f, F, "f"), K, F)
        else:
            plan = prepared.plan(self.target_cr, self.strategy, self.metric, self.delta,
                                 self.n_samples, self.depth_limit)
        self.plan_ = plan
        self.ranks_ = plan.ranks
        self.compression_ratio_ = plan.achieved_cr
        self.transforms_ = prepared.transforms
        self.tucker_ = truncate(prepared.operator, plan.ranks)
        self.singular_values_ = prepared.operator.singular_values
        self.dims_ = (K, 3, F)
        return self

    def transform(self, X):
        check_is_fitted(self, "tucker_")
        arr = check_animation_tensor(X)
        if arr.shape != self.dims_:
            raise DimensionMismatchError("tensor dims differ from fit", self.dims_, arr.shape)
        if self.normalize:
            arr = apply_transforms(arr, self.transforms_)
        core = arr
        for mode, u in enumerate(self.tucker_.factors, start=1):
            core = mode_multiply(core, u.T, mode)
        return core.array

    def inverse_transform(self, X):
        check_is_fitted(self, "tucker_")
        core = np.asarray(X, dtype=np.float64)
        if core.shape != self.ranks_:
            raise DimensionMismatchError("core shape", self.ranks_, core.shape)
        out = Tensor3(core)
        for mode, u in enumerate(self.tucker_.factors, start=1):
            out = mode_multiply(out, u, mode)
        if self.normalize:
            out = apply_inverse_transforms(out, self.transforms_)
        return out.array

    def reconstruct(self):
        """Decoded animation for the fitted data."""
        check_is_fitted(self, "tucker_")
        out = reconstruct(self.tucker_)
        if self.normalize:
            out = apply_inverse_transforms(out, self.transforms_)
        return out.array


class PCACompressor(TransformerMixin, BaseEstimator):
    """Key-frame PCA baseline; ``transform`` returns per-frame coefficients."""

    def __init__(self, n_components=1, normalize=True):
        self.n_components = n_components
        self.normalize = normalize

    def fit(self, X, y=None):
        arr = check_animation_tensor(X, min_vertices=4 if self.normalize else 1)
        K, _, F = arr.shape
        p = check_rank(self.n_components, min(F, 3 * K), "n_components")
        if self.normalize:
            x, self.transforms_ = estimate_rigid_motion(arr)
        else:
            x, self.transforms_ = Tensor3(arr), None
        self.model_ = pca_compress(x, p)
        self.components_ = self.model_.components
        self.mean_ = self.model_.mean
        self.explained_variance_ = self.model_.eigenvalues[:p]
        self.compression_ratio_ = pca_compression_ratio(p, K, F)
        self.dims_ = (K, 3, F)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        arr = check_animation_tensor(X)
        if arr.shape != self.dims_:
            raise DimensionMismatchError("tensor dims differ from fit", self.dims_, arr.shape)
        if self.normalize:
            arr = apply_transforms(arr, self.transforms_)
        return (frames_as_rows(arr) - self.mean_) @ self.components_.T

    def inverse_transform(self, X):
        check_is_fitted(self, "model_")
        coeffs = np.asarray(X, dtype=np.float64)
        if coeffs.shape != self.model_.coefficients.shape:
            raise DimensionMismatchError("coefficient shape", self.model_.coefficients.shape,
                                         coeffs.shape)
        model = type(self.model_)(self.components_, coeffs, self.mean_, self.model_.eigenvalues)
        out = pca_reconstruct(model, self.dims_)
        if self.normalize:
            out = apply_inverse_transforms(out, self.transforms_)
        return out.array


class AnimationCodec(BaseEstimator):
    """Full encoder: ``fit`` prepares and compresses, ``encode`` returns bytes.

    ``predict`` decodes the fitted container, giving the reconstruction a
    downstream metric would see.
    """

    def __init__(self, target_cr=None, ranks=None, strategy="diagonal", metric="mse", ds=4,
                 delta=planning.DEFAULT_DELTA, n_samples=planning.DEFAULT_SAMPLES,
                 depth_limit=planning.DEFAULT_DEPTH, count_overhead=False):
        self.target_cr = target_cr
        self.ranks = ranks
        self.strategy = strategy
        self.metric = metric
        self.ds = ds
        self.delta = delta
        self.n_samples = n_samples
        self.depth_limit = depth_limit
        self.count_overhead = count_overhead

    def fit(self, X, y=None):
        if (self.ranks is None) == (self.target_cr is None):
            raise ValueError("set exactly one of ranks and target_cr")
        anim = X if isinstance(X, codec.AnimationSequence) else codec.AnimationSequence(
            Tensor3(check_animation_tensor(X, min_vertices=4)))
        self.prepared_ = codec.prepare(anim)
        self.container_ = codec.encode(
            anim, self.target_cr, self.strategy, self.metric, self.ds, self.delta,
            self.n_samples, self.depth_limit, self.ranks, self.count_overhead,
            prepared=self.prepared_,
        )
        self.ranks_ = self.container_.ranks
        self.measured_cr_ = codec.measured_cr(self.container_)
        return self

    def encode(self) -> bytes:
        check_is_fitted(self, "container_")
        return self.container_.to_bytes()

    def predict(self, X=None):
        check_is_fitted(self, "container_")
        return codec.decode(self.container_).array

    @staticmethod
    def decode(blob) -> np.ndarray:
        return codec.decode(codec.CompressedAnimation.from_bytes(blob)).array

