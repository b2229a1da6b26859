"""Binary mask and dense map primitives.

Masks are 2-D numpy ``bool`` arrays, dense maps are float arrays. Pixel
coordinates are zero-based with ``x`` the column and ``y`` the row.
"""

from __future__ import annotations

import numpy as np


def as_mask(m) -> np.ndarray:
    """Validate ``m`` as a binary mask and return it as a bool array."""
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"mask must be a non-degenerate 2-D array, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    return arr.astype(bool)


def as_dense(m, ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected a rank-{ndim} map, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("dense map contains non-finite values")
    return arr


def iou(a, b) -> float:
    """Intersection over union of two masks; 0.0 when both are empty."""
    a = as_mask(a)
    b = as_mask(b)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between stacks of masks, ``(N, H, W) x (M, H, W) -> (N, M)``."""
    if a.shape[1:] != b.shape[1:]:
        raise ValueError(f"mask shapes differ: {a.shape[1:]} vs {b.shape[1:]}")
    fa = a.reshape(len(a), -1).astype(np.float64)
    fb = b.reshape(len(b), -1).astype(np.float64)
    inter = fa @ fb.T
    union = fa.sum(1)[:, None] + fb.sum(1)[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def mass_center_extent(m) -> tuple[float, float, int, int]:
    """Return ``(c_x, c_y, w, h)`` for a nonempty mask.

    The center is the mean foreground pixel coordinate; ``w`` and ``h`` are
    the extents of the tight bounding box (a single pixel has ``w = h = 1``).
    """
    m = as_mask(m)
    ys, xs = np.nonzero(m)
    if xs.size == 0:
        raise ValueError("mass center of an empty mask is undefined")
    w = int(xs.max() - xs.min() + 1)
    h = int(ys.max() - ys.min() + 1)
    return float(xs.mean()), float(ys.mean()), w, h


def threshold_map(m, t: float) -> np.ndarray:
    """Binarize with a strict ``>`` so a map equal to ``t`` everywhere is empty."""
    if not 0.0 < t < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {t}")
    return as_dense(m, ndim=2) > t


def upsample_mask(m: np.ndarray, stride: int) -> np.ndarray:
    """Nearest-neighbour upsampling by an integer factor."""
    if stride == 1:
        return m
    return np.repeat(np.repeat(m, stride, axis=-2), stride, axis=-1)


def downsample_mask(m: np.ndarray, stride: int) -> np.ndarray:
    """Pick the top-left pixel of every ``stride x stride`` block."""
    if stride == 1:
        return m
    if m.shape[-2] % stride or m.shape[-1] % stride:
        raise ValueError(f"mask shape {m.shape} not divisible by stride {stride}")
    return m[..., ::stride, ::stride]
