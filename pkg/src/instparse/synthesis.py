"""Soft instance masks as a sigmoid of a prototype/coefficient product, and
conversion of per-cell outputs into scored candidates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .masks import as_dense, upsample_mask
from .structures import HUMAN, ScoredInstance

DEFAULT_NUM_PROTOTYPES = 256
DEFAULT_MASK_THRESHOLD = 0.5


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1)
    e = np.abs(flat)
    np.negative(e, out=e)
    np.exp(e, out=e)
    out = e + 1.0
    np.reciprocal(out, out=out)
    # exp(x) / (1 + exp(x)) for negative x, never overflows
    np.multiply(out, e, out=out, where=flat < 0)
    return out.reshape(x.shape)


def combine_logits(prototypes, coefficients) -> np.ndarray:
    """Pre-sigmoid mask logits ``(S*S, H, W)``.

    Each dot product is accumulated in ascending prototype index, in float64,
    so results are bit-reproducible. Terms whose coefficient or prototype is
    exactly zero add nothing and are skipped.
    """
    P = as_dense(prototypes, ndim=3)
    F = as_dense(coefficients, ndim=3)
    K, H, W = P.shape
    if F.shape[0] != K:
        raise ValueError(f"prototype count {K} != coefficient count {F.shape[0]}")
    S = F.shape[1]
    if F.shape[2] != S:
        raise ValueError(f"coefficient grid must be square, got {F.shape[1:]}")
    P2 = P.reshape(K, H * W)
    F2 = F.reshape(K, S * S)
    logits = np.zeros((S * S, H * W))
    for k in range(K):
        cells = np.flatnonzero(F2[k])
        if cells.size == 0 or not P2[k].any():
            continue
        logits[cells] += F2[k, cells, None] * P2[k]
    return logits.reshape(S * S, H, W)


def combine_masks(prototypes, coefficients) -> np.ndarray:
    return sigmoid(combine_logits(prototypes, coefficients))


def segmentation_score(soft, t: float = DEFAULT_MASK_THRESHOLD) -> float:
    """Mean soft probability over pixels above ``t`` (0.0 if none)."""
    soft = as_dense(soft, ndim=2)
    fg = soft > t
    n = np.count_nonzero(fg)
    if n == 0:
        return 0.0
    return float(soft[fg].sum() / n)


def extract_candidates(category_scores, masks, t_bin: float = DEFAULT_MASK_THRESHOLD, stride: int = 1) -> list[ScoredInstance]:
    """One candidate per grid cell whose binarized mask is nonempty.

    ``category_scores`` is ``(C, S, S)``, ``masks`` is ``(S*S, h, w)``.
    Candidate masks are upsampled by ``stride`` to image resolution.
    Argmax ties go to the lowest category index.
    """
    cat = as_dense(category_scores, ndim=3)
    soft = as_dense(masks, ndim=3)
    C, S, S2 = cat.shape
    if S != S2 or soft.shape[0] != S * S:
        raise ValueError(f"category grid {cat.shape} does not match {soft.shape[0]} mask channels")
    flat = soft.reshape(S * S, -1)
    fg = flat > t_bin
    counts = fg.sum(axis=1)
    cat_flat = cat.reshape(C, S * S)
    labels = cat_flat.argmax(axis=0)

    out = []
    for cell in np.flatnonzero(counts):
        seg = flat[cell][fg[cell]].sum() / counts[cell]
        label = int(labels[cell])
        score = float(cat_flat[label, cell] * seg)
        mask = upsample_mask(fg[cell].reshape(soft.shape[1:]), stride)
        out.append(ScoredInstance(mask=mask, category=label, score=score))
    return out


@dataclass
class LevelOutputs:
    level_id: str
    kind: str
    coefficients: np.ndarray  # (K, S, S)
    category: np.ndarray  # (C, S, S)


@dataclass
class NetworkOutputs:
    """Everything the grouping stage needs from a (real or fabricated) network.

    ``prototypes`` live at ``1 / mask_stride`` of the image resolution.
    """

    image_size: tuple[int, int]
    mask_stride: int
    prototypes: np.ndarray  # (K, h, w)
    levels: list[LevelOutputs] = field(default_factory=list)


def decode(outputs: NetworkOutputs, t_bin: float = DEFAULT_MASK_THRESHOLD) -> tuple[list[ScoredInstance], list[ScoredInstance]]:
    """Run mask synthesis and candidate extraction on every level.

    Returns ``(part_candidates, human_candidates)`` in level then cell order.
    """
    parts, humans = [], []
    for level in outputs.levels:
        masks = combine_masks(outputs.prototypes, level.coefficients)
        found = extract_candidates(level.category, masks, t_bin, outputs.mask_stride)
        (humans if level.kind == HUMAN else parts).extend(found)
    return parts, humans
