"""HO-SVD (Tucker) compression of animated triangle meshes."""

from .codec import (
    AnimationSequence,
    CompressedAnimation,
    decode,
    encode,
    load_animation,
    measured_cr,
    prepare,
)
from .decomposition import TruncatedTucker, TuckerOperator, hosvd, reconstruct, truncate
from .estimators import AnimationCodec, PCACompressor, RigidMotionNormalizer, TuckerCompressor
from .exceptions import MeshTuckerError, UnreachableRateError
from .metrics import evaluate, hausdorff, msdm, mse
from .planning import (
    compression_ratio,
    diagonal_plan,
    enumerate_candidates,
    iterative_plan,
    space_savings,
)
from .rigid import apply_inverse_transforms, estimate_rigid_motion
from .synth import synthesize
from .tensor import Tensor3, fold, mode_multiply, unfold

__version__ = "0.1.0"
