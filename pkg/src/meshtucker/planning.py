"""Storage model and (v, f) rank selection.

``v`` and ``f`` are the retained mode-1 (vertex) and mode-3 (frame) ranks;
the mode-2 (coordinate) rank is always ``J = 3``. Storing the truncated
Tucker operator costs ``v*K + J*J + f*F + v*J*f`` values against ``K*F*J``
for the raw animation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "DEFAULT_DELTA",
    "DEFAULT_SAMPLES",
    "DEFAULT_DEPTH",
    "CompressionPlan",
    "CandidateList",
    "compression_ratio",
    "tucker_storage",
    "transform_storage",
    "space_savings",
    "cr_from_ss",
    "enumerate_candidates",
    "diagonal_plan",
    "iterative_plan",
    "explicit_plan",
]

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 0.002
DEFAULT_SAMPLES = 5
DEFAULT_DEPTH = 3

STRATEGIES = ("diagonal", "iterative", "explicit")


def _check_counts(**counts):
    for name, value in counts.items():
        if int(value) != value or value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value!r}")


def tucker_storage(v, f, K, F, J=3) -> int:
    """Number of stored values for a truncated Tucker operator."""
    return v * K + J * J + f * F + v * J * f


def transform_storage(F) -> int:
    """Number of stored values for the per-frame 3x4 transforms."""
    return 12 * F


def compression_ratio(v, f, K, F, J=3) -> float:
    """Size of the truncated Tucker operator relative to the raw tensor.

    Excludes the per-frame transforms; see :func:`transform_storage`.
    """
    _check_counts(v=v, f=f, K=K, F=F, J=J)
    return tucker_storage(v, f, K, F, J) / (K * F * J)


def space_savings(cr) -> float:
    """Percentage of the original size saved at compression ratio ``cr``."""
    if cr < 0:
        raise ValueError(f"compression ratio must be non-negative, got {cr}")
    return (1.0 - cr) * 100.0


def cr_from_ss(ss) -> float:
    return 1.0 - ss / 100.0


@dataclass(frozen=True)
class CompressionPlan:
    v: int
    f: int
    target_cr: float
    strategy: str
    achieved_cr: float

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.v < 1 or self.f < 1:
            raise ValueError("ranks must be at least 1")

    @property
    def vtf(self) -> float:
        return self.v / self.f

    @property
    def ranks(self) -> tuple[int, int, int]:
        return (self.v, 3, self.f)

    @property
    def residual(self) -> float:
        return abs(self.achieved_cr - self.target_cr)


@dataclass(frozen=True)
class CandidateList:
    """Candidate ``(v, f)`` pairs near a target compression ratio.

    ``pairs`` has shape ``(n, 2)``; ``crs`` holds each pair's compression
    ratio. An empty list means the target is unreachable within ``delta``.
    """

    pairs: np.ndarray
    crs: np.ndarray
    K: int
    F: int
    target_cr: float
    delta: float

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return (tuple(int(x) for x in p) for p in self.pairs)

    def __getitem__(self, i):
        v, f = self.pairs[i]
        return int(v), int(f)

    @property
    def residuals(self) -> np.ndarray:
        return np.abs(self.crs - self.target_cr)

    @property
    def dominant_mode(self) -> int:
        return 1 if self.K > self.F else 3


def _best_other(dominant, n_other, K, F, J, lam):
    """For each dominant-mode value, the other rank minimizing |CR - lam|.

    CR is affine in the other rank, so the optimum is next to the real
    root; a few integers around it are scored exactly and the first
    minimum (smallest rank) wins.
    """
    denom = K * F * J
    if K > F:
        v = dominant
        # CR*denom = v*K + J^2 + f*(F + J*v)
        root = (lam * denom - v * K - J * J) / (F + J * v)
    else:
        f = dominant
        # CR*denom = f*F + J^2 + v*(K + J*f)
        root = (lam * denom - f * F - J * J) / (K + J * f)
    base = np.floor(np.clip(root, -2, n_other + 2)).astype(np.int64)
    offsets = np.arange(-1, 3)
    trial = np.clip(base[:, None] + offsets[None, :], 1, n_other)
    if K > F:
        numer = v[:, None] * K + J * J + trial * F + v[:, None] * J * trial
    else:
        numer = trial * K + J * J + f[:, None] * F + f[:, None] * J * trial
    res = np.abs(numer / denom - lam)
    # Trials are non-decreasing along each row, so the first minimum is the
    # smallest rank among ties.
    best = np.argmin(res, axis=1)
    rows = np.arange(len(dominant))
    return trial[rows, best], numer[rows, best] / denom


def enumerate_candidates(K, F, lam, delta=DEFAULT_DELTA, J=3) -> CandidateList:
    """Pairs ``(v, f)`` whose compression ratio is within ``delta`` of ``lam``.

    The longer of the vertex and frame modes is the dominant one: for each of
    its values the other rank is chosen to minimize ``|CR - lam|`` and the
    pair is kept if that residual is at most ``delta``. The result is sorted
    by the dominant rank.
    """
    _check_counts(K=K, F=F, J=J)
    if not lam > 0:
        raise ValueError(f"target compression ratio must be positive, got {lam}")
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    if K > F:
        dom = np.arange(1, K + 1, dtype=np.int64)
        other, crs = _best_other(dom, F, K, F, J, lam)
        pairs = np.column_stack([dom, other])
    else:
        dom = np.arange(1, F + 1, dtype=np.int64)
        other, crs = _best_other(dom, K, K, F, J, lam)
        pairs = np.column_stack([other, dom])
    keep = np.abs(crs - lam) <= delta
    return CandidateList(pairs[keep], crs[keep], int(K), int(F), float(lam), float(delta))


def _plan(candidates, index, strategy):
    v, f = candidates[index]
    return CompressionPlan(v, f, candidates.target_cr, strategy, float(candidates.crs[index]))


def diagonal_plan(candidates: CandidateList) -> CompressionPlan:
    """Candidate retaining the most similar fraction of each mode.

    Minimizes ``|v/K - f/F|``; ties go to the smaller CR residual, then the
    smaller ``v``, then the smaller ``f``.
    """
    if len(candidates) == 0:
        raise ValueError("no candidates to choose from")
    K, F = candidates.K, candidates.F
    res = candidates.residuals

    def key(i):
        v, f = candidates[i]
        return (abs(v / K - f / F), res[i], v, f)

    return _plan(candidates, min(range(len(candidates)), key=key), "diagonal")


def _sample_indices(n, s):
    return sorted(set(int(round(x)) for x in np.linspace(0, n - 1, s)))


def iterative_plan(
    candidates: CandidateList,
    error_fn: Callable[[int, int], float],
    s: int = DEFAULT_SAMPLES,
    depth_limit: int = DEFAULT_DEPTH,
    return_trace: bool = False,
):
    """Sampled recursive search for the candidate with the lowest error.

    At each level ``s`` uniformly spaced candidates of the current sub-list
    are scored with ``error_fn(v, f)``; the search then recurses into the
    span between the neighbours of the best sample. The first call is level
    0 and recursion stops at level ``depth_limit``, so at most
    ``s * (depth_limit + 1)`` scores are computed. Scores are cached, and a
    sub-list with at most ``s`` unscored entries is scored completely and
    ends the search. The lowest error seen wins; ties go to the lowest list
    index.

    With ``return_trace=True`` a list of the scored list indices, in
    evaluation order, is returned alongside the plan.
    """
    if len(candidates) == 0:
        raise ValueError("no candidates to choose from")
    if s < 3:
        raise ValueError(f"need at least 3 samples per level, got {s}")
    if depth_limit < 1:
        raise ValueError(f"depth limit must be at least 1, got {depth_limit}")

    scores: dict[int, float] = {}
    trace: list[int] = []

    def score(i):
        if i not in scores:
            v, f = candidates[i]
            try:
                value = float(error_fn(v, f))
            except Exception as exc:
                raise RuntimeError(f"error function failed for (v={v}, f={f})") from exc
            scores[i] = value
            trace.append(i)
        return scores[i]

    lo, hi = 0, len(candidates) - 1
    depth = 0
    while True:
        span = range(lo, hi + 1)
        unscored = [i for i in span if i not in scores]
        if len(unscored) <= s:
            for i in unscored:
                score(i)
            break
        idx = [lo + i for i in _sample_indices(hi - lo + 1, s)]
        errs = [score(i) for i in idx]
        m = int(np.argmin(errs))
        logger.debug("level %d: sampled %s, best %d", depth, idx, idx[m])
        if depth == depth_limit:
            break
        lo = idx[max(m - 1, 0)]
        hi = idx[min(m + 1, len(idx) - 1)]
        depth += 1
    best = min(scores, key=lambda i: (scores[i], i))
    plan = _plan(candidates, best, "iterative")
    if return_trace:
        return plan, trace
    return plan


def explicit_plan(v, f, K, F, J=3) -> CompressionPlan:
    """Plan for user-chosen ranks."""
    if not (1 <= v <= K and 1 <= f <= F):
        raise ValueError(f"ranks (v={v}, f={f}) outside [1, {K}] x [1, {F}]")
    cr = compression_ratio(v, f, K, F, J)
    return CompressionPlan(int(v), int(f), cr, "explicit", cr)


def unreachable_message(K, F, lam, delta, J=3) -> str:
    lo = compression_ratio(1, 1, K, F, J)
    return (
        f"target CR {lam:.6g} (SS {space_savings(max(lam, 0.0)):.4g}%) unreachable within "
        f"delta {delta:g}; the smallest operator has CR {lo:.6g} (SS {space_savings(lo):.4g}%)"
    )


def feasible(K, F, lam, delta=DEFAULT_DELTA, J=3) -> bool:
    return lam > 0 and len(enumerate_candidates(K, F, lam, delta, J)) > 0
