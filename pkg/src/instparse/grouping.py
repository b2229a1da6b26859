"""Inference-time grouping of part instances into parsed humans.

Steps: keep the best-scoring parts, suppress duplicate humans with matrix
NMS, measure how much of each part lies inside each human, then paint each
human's category map from the parts it owns.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .masks import iou_matrix
from .structures import ParsingResult, ScoredInstance


@dataclass(frozen=True)
class GroupingConfig:
    n_part: int = 200
    s_part: float = 1.0 / 3.0
    s_human: float = 0.1
    r_human: float = 2.0 / 3.0
    nms_method: str = "gaussian"
    nms_sigma: float = 2.0
    n_human: int = 100

    def __post_init__(self):
        for name in ("s_part", "s_human", "r_human"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.n_part < 1 or self.n_human < 1:
            raise ValueError("n_part and n_human must be >= 1")
        if self.nms_method not in ("gaussian", "linear"):
            raise ValueError(f"unknown NMS method {self.nms_method!r}")
        if self.nms_sigma <= 0:
            raise ValueError("nms_sigma must be positive")


def _by_score(items: list[ScoredInstance]) -> list[int]:
    # stable: equal scores keep input order
    return sorted(range(len(items)), key=lambda i: -items[i].score)


def select_parts(candidates: list[ScoredInstance], cfg: GroupingConfig = GroupingConfig()) -> list[ScoredInstance]:
    kept = [c for c in candidates if c.score > cfg.s_part]
    return [kept[i] for i in _by_score(kept)][: cfg.n_part]


def nms_kernel(x: np.ndarray, method: str, sigma: float) -> np.ndarray:
    if method == "gaussian":
        return np.exp(-(x * x) / sigma)
    return 1.0 - x


def matrix_decay(masks: np.ndarray, method: str = "gaussian", sigma: float = 2.0) -> np.ndarray:
    """Decay factor per mask for a stack already sorted by descending score.

    ``decay[j] = min_{i<j} f(iou[i, j]) / f(max_{l<i} iou[l, i])``; a pair
    whose denominator is zero (``i`` duplicates an earlier mask under the
    linear kernel) is skipped. The first mask is never decayed.
    """
    n = len(masks)
    if n == 0:
        return np.ones(0)
    ious = np.triu(iou_matrix(masks, masks), k=1)
    comp = ious.max(axis=0)
    num = nms_kernel(ious, method, sigma)
    den = np.broadcast_to(nms_kernel(comp, method, sigma)[:, None], (n, n))
    valid = np.triu(np.ones((n, n), dtype=bool), k=1) & (den > 0)
    ratio = np.full((n, n), np.inf)
    np.divide(num, den, out=ratio, where=valid)
    decay = ratio.min(axis=0)
    return np.where(np.isinf(decay), 1.0, decay)


def matrix_nms(humans: list[ScoredInstance], cfg: GroupingConfig = GroupingConfig()) -> list[ScoredInstance]:
    kept = [h for h in humans if h.score > cfg.s_human]
    if not kept:
        return []
    ranked = [kept[i] for i in _by_score(kept)]
    decay = matrix_decay(np.stack([h.mask for h in ranked]), cfg.nms_method, cfg.nms_sigma)
    decayed = [replace(h, score=float(h.score * d)) for h, d in zip(ranked, decay)]
    return [decayed[i] for i in _by_score(decayed)][: cfg.n_human]


def overlap_ratios(parts: list[ScoredInstance], humans: list[ScoredInstance]) -> np.ndarray:
    """``ratio[h, p] = |part_p & human_h| / |part_p|`` via one matrix product."""
    if not parts or not humans:
        return np.zeros((len(humans), len(parts)))
    h_masks = np.stack([h.mask for h in humans]).reshape(len(humans), -1).astype(np.float64)
    p_masks = np.stack([p.mask for p in parts]).reshape(len(parts), -1).astype(np.float64)
    if h_masks.shape[1] != p_masks.shape[1]:
        raise ValueError("part and human masks differ in size")
    inter = h_masks @ p_masks.T
    area = p_masks.sum(axis=1)
    if (area == 0).any():
        raise ValueError("part with zero area")
    return inter / area[None, :]


def assemble(humans, parts, ratios, cfg: GroupingConfig = GroupingConfig()) -> list[ParsingResult]:
    """Build one result per human that owns at least one part.

    A part belongs to a human when its overlap ratio exceeds ``r_human``.
    Contested pixels go to the higher-scoring part (then lower category,
    then earlier part). The result mask is the human mask AND the union of
    its parts; the parsing score is the human score times the mean score of
    the parts over that mask.
    """
    ratios = np.asarray(ratios)
    if ratios.shape != (len(humans), len(parts)):
        raise ValueError(f"ratio matrix {ratios.shape} does not match {len(humans)} humans x {len(parts)} parts")
    results = []
    for h, human in enumerate(humans):
        owned = [p for p in range(len(parts)) if ratios[h, p] > cfg.r_human]
        if not owned:
            continue
        owned.sort(key=lambda p: (-parts[p].score, parts[p].category, p))
        labels = np.zeros(human.mask.shape, dtype=np.int32)
        pixel_score = np.zeros(human.mask.shape)
        for p in owned:
            free = parts[p].mask & (labels == 0)
            labels[free] = parts[p].category + 1
            pixel_score[free] = parts[p].score
        final = human.mask & (labels > 0)
        if not final.any():
            continue
        labels[~final] = 0
        score = human.score * float(pixel_score[final].mean())
        results.append(
            ParsingResult(
                human_mask=human.mask,
                category_map=labels,
                parsing_score=score,
                human_score=human.score,
                part_indices=owned,
            )
        )
    return results


def run_pipeline(part_candidates, human_candidates, cfg: GroupingConfig = GroupingConfig()) -> list[ParsingResult]:
    parts = select_parts(part_candidates, cfg)
    humans = matrix_nms(human_candidates, cfg)
    return assemble(humans, parts, overlap_ratios(parts, humans), cfg)
