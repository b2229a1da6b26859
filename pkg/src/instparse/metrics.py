"""Multi-human parsing metrics: part-based AP and PCP, and region AP.

Matching protocol (shared by every metric): predictions from all images are
pooled and visited by descending parsing score (ties keep input order).
Each prediction is compared with the still-unmatched ground-truth persons of
its own image and paired with the best one (ties: lower gt index). It is a
true positive when that best value exceeds the threshold.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .masks import iou
from .structures import ParsingResult

VOL_THRESHOLDS = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass
class GtHuman:
    human_mask: np.ndarray
    parts: dict[int, np.ndarray] = field(default_factory=dict)


@dataclass
class PRCurve:
    recalls: np.ndarray
    precisions: np.ndarray
    ap: float
    tp: int
    fp: int
    fn: int


@dataclass
class MetricRecord:
    metric: str
    threshold: float | None
    value: float
    tp: int | None = None
    fp: int | None = None
    fn: int | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def gt_humans_from_scene(scene) -> list[GtHuman]:
    out = []
    for h in scene.human_indices():
        parts: dict[int, np.ndarray] = {}
        for p in scene.part_indices(parent=h):
            inst = scene.instances[p]
            prev = parts.get(inst.category)
            parts[inst.category] = inst.mask if prev is None else (prev | inst.mask)
        out.append(GtHuman(scene.instances[h].mask, parts))
    return out


def _pred_categories(pred: ParsingResult) -> set[int]:
    return {int(v) - 1 for v in np.unique(pred.category_map) if v > 0}


def part_ious(pred: ParsingResult | None, gt: GtHuman, categories) -> dict[int, float]:
    empty = np.zeros_like(gt.human_mask, dtype=bool)
    out = {}
    for c in categories:
        pm = pred.part_mask(c) if pred is not None else empty
        out[c] = iou(pm, gt.parts.get(c, empty))
    return out


def mean_part_iou(pred: ParsingResult, gt: GtHuman) -> float:
    """Mean per-category pixel IoU over categories in either pred or gt."""
    cats = sorted(set(gt.parts) | _pred_categories(pred))
    if not cats:
        return 0.0
    return float(np.mean(list(part_ious(pred, gt, cats).values())))


def person_iou(pred: ParsingResult, gt: GtHuman) -> float:
    return iou(pred.mask, gt.human_mask)


def match(results, gts, t: float, criterion: Callable[[ParsingResult, GtHuman], float]):
    """Greedy score-ordered matching.

    Returns ``(is_tp, matches)`` where ``is_tp`` follows the sorted
    prediction order and ``matches`` maps ``(image, gt)`` to
    ``(image, pred)``.
    """
    if len(results) != len(gts):
        raise ValueError(f"{len(results)} result lists for {len(gts)} images")
    pool = [(img, k) for img, preds in enumerate(results) for k in range(len(preds))]
    pool.sort(key=lambda e: -results[e[0]][e[1]].parsing_score)
    taken: set[tuple[int, int]] = set()
    matches = {}
    is_tp = []
    for img, k in pool:
        pred = results[img][k]
        best, best_g = -np.inf, -1
        for g, gt in enumerate(gts[img]):
            if (img, g) in taken:
                continue
            v = criterion(pred, gt)
            if v > best:
                best, best_g = v, g
        if best_g >= 0 and best > t:
            taken.add((img, best_g))
            matches[(img, best_g)] = (img, k)
            is_tp.append(True)
        else:
            is_tp.append(False)
    return np.array(is_tp, dtype=bool), matches


def pr_curve(is_tp: np.ndarray, npos: int) -> PRCurve:
    """Precision/recall points and the area under the precision envelope."""
    tp = np.cumsum(is_tp).astype(np.float64)
    fp = np.cumsum(~is_tp).astype(np.float64)
    n_tp = int(is_tp.sum())
    n_fp = int(len(is_tp) - n_tp)
    if npos == 0 or len(is_tp) == 0:
        return PRCurve(np.zeros(len(is_tp)), np.zeros(len(is_tp)), 0.0, n_tp, n_fp, npos - n_tp)
    recall = tp / npos
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    # integer recall steps keep a perfect curve at exactly 1.0
    ap = float((is_tp * envelope).sum() / npos)
    return PRCurve(recall, precision, ap, n_tp, n_fp, npos - n_tp)


def _curve(results, gts, t, criterion) -> PRCurve:
    is_tp, _ = match(results, gts, t, criterion)
    return pr_curve(is_tp, sum(len(g) for g in gts))


def ap_p(results, gts, t: float = 0.5) -> float:
    return _curve(results, gts, t, mean_part_iou).ap


def ap_p_vol(results, gts) -> float:
    return float(np.mean([ap_p(results, gts, t) for t in VOL_THRESHOLDS]))


def ap_r(results, gts, t: float = 0.5) -> float:
    return _curve(results, gts, t, person_iou).ap


def ap_r_vol(results, gts) -> float:
    return float(np.mean([ap_r(results, gts, t) for t in VOL_THRESHOLDS]))


def pcp_per_person(results, gts, t: float = 0.5) -> list[float]:
    _, matches = match(results, gts, t, mean_part_iou)
    out = []
    for img, people in enumerate(gts):
        for g, gt in enumerate(people):
            if not gt.parts:
                raise ValueError(f"image {img} person {g} has no part categories")
            hit = matches.get((img, g))
            pred = results[hit[0]][hit[1]] if hit else None
            ious = part_ious(pred, gt, sorted(gt.parts))
            out.append(sum(v > t for v in ious.values()) / len(gt.parts))
    return out


def pcp50(results, gts) -> float:
    per = pcp_per_person(results, gts, 0.5)
    return float(np.mean(per)) if per else 0.0


def evaluate(results, gts) -> list[MetricRecord]:
    """Every metric as a flat list of records (per-threshold AP included)."""
    records = []
    for name, crit in (("AP^p", mean_part_iou), ("AP^r", person_iou)):
        values = []
        for t in VOL_THRESHOLDS:
            c = _curve(results, gts, t, crit)
            values.append(c.ap)
            records.append(MetricRecord(name, t, c.ap, c.tp, c.fp, c.fn))
        records.append(MetricRecord(f"{name}_vol", None, float(np.mean(values))))
    _, matches = match(results, gts, 0.5, mean_part_iou)
    npred = sum(len(r) for r in results)
    ngt = sum(len(g) for g in gts)
    records.append(MetricRecord("PCP", 0.5, pcp50(results, gts), len(matches), npred - len(matches), ngt - len(matches)))
    return records
