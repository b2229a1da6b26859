"""Focal and dice losses over grid predictions, with analytic gradients
with respect to the predicted probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assign import DEFAULT_LEVELS, GridTargets
from .masks import downsample_mask
from .structures import HUMAN, PART

FOCAL_GAMMA = 2.0
FOCAL_ALPHA = 0.25
DICE_SMOOTH = 1e-6
MASK_LOSS_WEIGHT = 3.0


@dataclass
class LossReport:
    total: float
    cls_part: float
    mask_part: float
    cls_human: float
    mask_human: float
    weight: float = MASK_LOSS_WEIGHT


@dataclass
class LevelPrediction:
    """Network outputs for one level: ``category`` is ``(C, S, S)``
    probabilities and ``masks`` is ``(S*S, h, w)`` soft masks."""

    level_id: str
    category: np.ndarray
    masks: np.ndarray


def focal_loss(pred, target, gamma: float = FOCAL_GAMMA, alpha: float = FOCAL_ALPHA) -> tuple[float, np.ndarray]:
    """Binary focal loss summed over cells and classes.

    ``target`` holds 0 for background and ``category + 1`` otherwise. The
    sum is divided by (number of positive cells + 1). Probabilities of
    exactly 0 or 1 are accepted where the term stays finite.
    """
    p = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target)
    C, S, S2 = p.shape
    if target.shape != (S, S2):
        raise ValueError(f"target shape {target.shape} does not match prediction grid {(S, S2)}")
    if not ((p >= 0) & (p <= 1)).all():
        raise ValueError("probabilities must lie in [0, 1]")
    if gamma < 0 or not 0 < alpha < 1:
        raise ValueError("need gamma >= 0 and alpha in (0, 1)")

    pos = np.zeros_like(p, dtype=bool)
    for c in range(C):
        pos[c] = target == c + 1
    if (pos & (p == 0)).any() or (~pos & (p == 1)).any():
        raise ValueError("focal loss is infinite: a target class has probability 0")

    pt = np.where(pos, p, 1.0 - p)
    at = np.where(pos, alpha, 1.0 - alpha)
    one_m = 1.0 - pt
    log_pt = np.log(pt)
    mod = one_m**gamma
    terms = -at * mod * log_pt

    # d term / d pt, then chain through pt = p or 1 - p
    if gamma == 0:
        dmod = np.zeros_like(pt)
    elif gamma >= 1:
        dmod = gamma * one_m ** (gamma - 1)
    else:
        # one_m ** (gamma - 1) diverges at pt = 1 but log(pt) vanishes faster
        dmod = np.where(one_m > 0, gamma * np.where(one_m > 0, one_m, 1.0) ** (gamma - 1), 0.0)
    dterm_dpt = -at * (-dmod * log_pt + mod / pt)
    grad = np.where(pos, dterm_dpt, -dterm_dpt)

    norm = np.count_nonzero(target) + 1
    return float(terms.sum() / norm), grad / norm


def dice_loss(pred, gt, smooth: float = DICE_SMOOTH) -> tuple[float, np.ndarray]:
    """``1 - 2 sum(p g) / (sum(p^2) + sum(g^2) + smooth)`` and its gradient."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"prediction shape {p.shape} != target shape {g.shape}")
    inter = (p * g).sum()
    den = (p * p).sum() + (g * g).sum() + smooth
    value = 1.0 - 2.0 * inter / den
    grad = -(2.0 * g * den - 4.0 * inter * p) / (den * den)
    return float(value), grad


def total_loss(predictions, targets, weight: float = MASK_LOSS_WEIGHT, levels=None, mask_stride: int = 1) -> LossReport:
    """Combine per-level losses into part and human terms.

    Classification terms are summed over levels; mask terms are averaged
    over all positive cells of the branch. Levels are matched by id and
    visited in sorted id order, so input order does not matter.
    ``levels`` is the ``LevelSpec`` table that says which ids are human.
    """
    specs = {s.level_id: s for s in (levels or DEFAULT_LEVELS)}
    preds = {p.level_id: p for p in predictions}
    tgts: dict[str, GridTargets] = {t.level_id: t for t in targets}
    if set(preds) != set(tgts) or len(preds) != len(predictions) or len(tgts) != len(targets):
        raise ValueError(f"prediction levels {sorted(preds)} do not match target levels {sorted(tgts)}")

    cls = {HUMAN: 0.0, PART: 0.0}
    dice: dict[str, list[float]] = {HUMAN: [], PART: []}
    for level_id in sorted(preds):
        pred, tgt = preds[level_id], tgts[level_id]
        branch = specs[level_id].kind
        value, _ = focal_loss(pred.category, tgt.category_target)
        cls[branch] += value
        for cell in tgt.positive_cells():
            gt = downsample_mask(tgt.mask_targets[cell], mask_stride)
            d, _ = dice_loss(pred.masks[cell], gt)
            dice[branch].append(d)

    mask_part = float(np.mean(dice[PART])) if dice[PART] else 0.0
    mask_human = float(np.mean(dice[HUMAN])) if dice[HUMAN] else 0.0
    total = cls[PART] + weight * mask_part + cls[HUMAN] + weight * mask_human
    return LossReport(total, cls[PART], mask_part, cls[HUMAN], mask_human, weight)
