"""Decision-level post-processing: box-filter temporal smoothing, per-unit
threshold search, prediction blending, and kernel-size sweeps.

Smoothing uses a truncated (shrinking) window at track boundaries and never
crosses videos; thresholds compare inclusively (score >= threshold).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .metrics import _binary_f1


@dataclass
class PredictionSeq:
    """Per-frame prediction values for one video (T x C)."""
    video_id: str
    frame_index: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.frame_index = np.asarray(self.frame_index, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.frame_index.shape[0]:
            raise ValueError("values row count must match frame count")


def smooth(seq: PredictionSeq, k: int) -> PredictionSeq:
    """Mean over frames [t-k, t+k], truncated at the track boundaries."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return PredictionSeq(seq.video_id, seq.frame_index.copy(), seq.values.copy())
    return PredictionSeq(seq.video_id, seq.frame_index.copy(),
                         smooth_matrix(seq.values, k))


def smooth_matrix(values: np.ndarray, k: int) -> np.ndarray:
    """Prefix-sum box filter over axis 0 with truncated boundary windows."""
    values = np.asarray(values, dtype=float)
    t = values.shape[0]
    if k == 0 or t == 0:
        return values.copy()
    csum = np.vstack([np.zeros((1, values.shape[1])), np.cumsum(values, axis=0)])
    idx = np.arange(t)
    lo = np.maximum(idx - k, 0)
    hi = np.minimum(idx + k, t - 1)
    return (csum[hi + 1] - csum[lo]) / (hi - lo + 1)[:, None]


def smooth_matrix_naive(values: np.ndarray, k: int) -> np.ndarray:
    """O(T*k) reference windowed mean; oracle for smooth_matrix."""
    values = np.asarray(values, dtype=float)
    t = values.shape[0]
    out = np.empty_like(values)
    for i in range(t):
        out[i] = values[max(0, i - k):min(t - 1, i + k) + 1].mean(axis=0)
    return out


def threshold_grid(grid_step: float) -> np.ndarray:
    """Grid {step, 2*step, ...} up to and including 1 - step."""
    if not (0.0 < grid_step <= 0.5):
        raise ValueError("grid_step must be in (0, 0.5]")
    n = int(np.floor((1.0 - grid_step) / grid_step + 1e-9))
    return grid_step * np.arange(1, n + 1)


def search_thresholds(scores: np.ndarray, labels: np.ndarray, grid_step: float = 0.05):
    """Per-unit threshold maximizing that unit's binary F1 on the grid.

    Ties break toward the smallest threshold. Returns (thresholds, per-unit F1).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise ValueError("scores/labels shape mismatch")
    grid = threshold_grid(grid_step)
    n_units = scores.shape[1]
    best_t = np.empty(n_units)
    best_f1 = np.empty(n_units)
    for u in range(n_units):
        best_t[u], best_f1[u] = grid[0], -1.0
        for t in grid:
            pred = scores[:, u] >= t
            true = labels[:, u] == 1
            f1 = _binary_f1(int(np.sum(pred & true)), int(np.sum(pred & ~true)),
                            int(np.sum(~pred & true)))
            if f1 > best_f1[u]:
                best_t[u], best_f1[u] = t, f1
    return best_t, best_f1


def apply_thresholds(scores: np.ndarray, thresholds) -> np.ndarray:
    """bit = 1 iff score >= threshold (inclusive)."""
    scores = np.asarray(scores, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.shape != (scores.shape[1],):
        raise ValueError("one threshold per unit required")
    return (scores >= thresholds).astype(int)


def blend(a: PredictionSeq, b: PredictionSeq, w: float) -> PredictionSeq:
    """Convex combination w*a + (1-w)*b of two aligned prediction sequences."""
    if not (0.0 <= w <= 1.0):
        raise ValueError("blend weight must be in [0, 1]")
    if a.video_id != b.video_id:
        raise DataError(f"blend members cover different videos: {a.video_id} vs {b.video_id}")
    if a.frame_index.shape != b.frame_index.shape or (a.frame_index != b.frame_index).any():
        bad = None
        for i in range(min(len(a.frame_index), len(b.frame_index))):
            if a.frame_index[i] != b.frame_index[i]:
                bad = int(a.frame_index[i])
                break
        raise DataError(
            f"blend members misaligned for video {a.video_id}"
            + (f" at frame {bad}" if bad is not None else " (length mismatch)")
        )
    if a.values.shape != b.values.shape:
        raise DataError(f"blend members have different widths for video {a.video_id}")
    return PredictionSeq(a.video_id, a.frame_index.copy(),
                         w * a.values + (1.0 - w) * b.values)


def sweep_kernel(eval_fn, seqs, k_values):
    """Evaluate a metric closure after smoothing at each k, in input order."""
    k_values = list(k_values)
    if not k_values:
        raise ValueError("k_values must be non-empty")
    out = []
    for k in k_values:
        out.append((k, eval_fn([smooth(s, k) for s in seqs])))
    return out
