import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import box
from instparse.metrics import (
    VOL_THRESHOLDS,
    GtHuman,
    ap_p,
    ap_p_vol,
    ap_r,
    ap_r_vol,
    evaluate,
    match,
    mean_part_iou,
    pcp50,
    pcp_per_person,
    person_iou,
    pr_curve,
)
from instparse.structures import ParsingResult

SHAPE = (20, 20)


def result(parts: dict, score: float, human=None):
    """ParsingResult whose category map paints ``parts`` (category -> mask)."""
    cmap = np.zeros(SHAPE, dtype=np.int32)
    for c, m in parts.items():
        cmap[m & (cmap == 0)] = c + 1
    hm = human if human is not None else cmap > 0
    return ParsingResult(human_mask=hm, category_map=cmap, parsing_score=score)


def gt_from(parts: dict):
    hm = np.zeros(SHAPE, dtype=bool)
    for m in parts.values():
        hm |= m
    return GtHuman(hm, dict(parts))


def four_part_gt():
    return gt_from({c: box(SHAPE, 5 * c, 5 * c + 4, 0, 10) for c in range(4)})


def test_vol_thresholds():
    assert VOL_THRESHOLDS == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def test_pr_tp_then_fp():
    assert pr_curve(np.array([True, False]), 1).ap == 1.0


def test_pr_fp_then_tp():
    assert pr_curve(np.array([False, True]), 1).ap == 0.5


def test_pr_counts():
    c = pr_curve(np.array([True, False, True]), 4)
    assert (c.tp, c.fp, c.fn) == (2, 1, 2)
    assert np.allclose(c.recalls, [0.25, 0.25, 0.5])
    assert np.allclose(c.precisions, [1.0, 0.5, 2 / 3])
    # envelope: 1 at the first TP, 2/3 at the second
    assert c.ap == pytest.approx((1.0 + 2 / 3) / 4)


def test_pr_hand_example_through_matching():
    gt = four_part_gt()
    perfect = result(gt.parts, 0.9)
    wrong = result({0: box(SHAPE, 0, 2, 15, 20)}, 0.8)
    assert ap_p([[perfect, wrong]], [[gt]]) == 1.0
    perfect.parsing_score, wrong.parsing_score = 0.7, 0.8
    assert ap_p([[perfect, wrong]], [[gt]]) == 0.5


def test_mean_part_iou_identity():
    gt = four_part_gt()
    assert mean_part_iou(result(gt.parts, 1.0), gt) == 1.0


def test_mean_part_iou_empty_pred():
    gt = four_part_gt()
    assert mean_part_iou(result({}, 1.0, human=gt.human_mask), gt) == 0.0


def test_mean_part_iou_half():
    a, b = box(SHAPE, 0, 5, 0, 5), box(SHAPE, 10, 15, 0, 5)
    assert mean_part_iou(result({0: a}, 1.0), gt_from({0: a, 1: b})) == 0.5


def test_mean_part_iou_extra_category_counts():
    a, b = box(SHAPE, 0, 5, 0, 5), box(SHAPE, 10, 15, 0, 5)
    assert mean_part_iou(result({0: a, 3: b}, 1.0), gt_from({0: a})) == 0.5


def test_vol_five_ninths():
    a = box(SHAPE, 0, 5, 0, 5)
    b = box(SHAPE, 10, 12, 0, 5)  # 10 px
    hit = np.zeros(SHAPE, dtype=bool)
    hit[10, 0] = True  # IoU with b = 1/10
    gt = gt_from({0: a, 1: b})
    pred = result({0: a, 1: hit}, 1.0)
    assert mean_part_iou(pred, gt) == pytest.approx(0.55)
    assert ap_p_vol([[pred]], [[gt]]) == pytest.approx(5 / 9, abs=1e-15)
    passed = sum(ap_p([[pred]], [[gt]], t) == 1.0 for t in VOL_THRESHOLDS)
    assert passed == 5


def test_pcp_three_quarters():
    gt = four_part_gt()
    pred = result({c: gt.parts[c] for c in range(3)}, 1.0)
    assert pcp_per_person([[pred]], [[gt]]) == [0.75]
    assert pcp50([[pred]], [[gt]]) == 0.75


def test_pcp_unmatched_is_zero():
    gt = four_part_gt()
    assert pcp50([[]], [[gt]]) == 0.0


def test_pcp_rejects_partless_gt():
    with pytest.raises(ValueError):
        pcp50([[]], [[GtHuman(box(SHAPE, 0, 2, 0, 2), {})]])


def test_ap_r_person_iou():
    gt_mask = box(SHAPE, 0, 4, 0, 5)  # 20 px
    gt = gt_from({0: gt_mask})
    pred_mask = np.zeros(SHAPE, dtype=bool)
    pred_mask.flat[np.flatnonzero(gt_mask)[:13]] = True
    pred = result({0: pred_mask}, 1.0, human=gt_mask)
    assert person_iou(pred, gt) == pytest.approx(0.65)
    assert ap_r([[pred]], [[gt]], 0.5) == 1.0
    assert ap_r([[pred]], [[gt]], 0.6) == 1.0
    assert ap_r([[pred]], [[gt]], 0.7) == 0.0


def test_ap_r_disjoint():
    gt = gt_from({0: box(SHAPE, 0, 4, 0, 5)})
    pred = result({0: box(SHAPE, 10, 14, 10, 15)}, 1.0)
    assert ap_r_vol([[pred]], [[gt]]) == 0.0


def test_perfect_everything():
    gts = [[four_part_gt()], [gt_from({1: box(SHAPE, 2, 9, 3, 8)})]]
    results = [[result(g.parts, 0.5 + i / 10) for g in img] for i, img in enumerate(gts)]
    assert ap_p(results, gts) == 1.0
    assert ap_p_vol(results, gts) == 1.0
    assert pcp50(results, gts) == 1.0
    assert ap_r_vol(results, gts) == 1.0


def test_no_predictions():
    assert ap_p([[]], [[four_part_gt()]]) == 0.0
    assert ap_p_vol([[]], [[four_part_gt()]]) == 0.0


def test_duplicates_one_tp():
    gt = four_part_gt()
    preds = [result(gt.parts, s) for s in (0.9, 0.8, 0.7)]
    is_tp, matches = match([preds], [[gt]], 0.5, mean_part_iou)
    assert is_tp.tolist() == [True, False, False]
    assert matches == {(0, 0): (0, 0)}


def test_match_within_image_only():
    gt = four_part_gt()
    is_tp, _ = match([[result(gt.parts, 1.0)], []], [[], [gt]], 0.5, mean_part_iou)
    assert is_tp.tolist() == [False]


def test_image_count_mismatch():
    with pytest.raises(ValueError):
        match([[]], [[], []], 0.5, mean_part_iou)


def _random_case(seed):
    rng = np.random.default_rng(seed)
    gts, results = [], []
    for _ in range(int(rng.integers(1, 3))):
        img_gts = []
        for _ in range(int(rng.integers(1, 3))):
            y, x = rng.integers(0, 12, size=2)
            img_gts.append(gt_from({int(c): box(SHAPE, y + 2 * k, y + 2 * k + 2, x, x + 6) for k, c in enumerate(rng.choice(5, 2, replace=False))}))
        img_res = []
        for _ in range(int(rng.integers(0, 4))):
            y, x = rng.integers(0, 14, size=2)
            img_res.append(result({int(rng.integers(0, 5)): box(SHAPE, y, y + 4, x, x + 6)}, float(rng.random())))
        gts.append(img_gts)
        results.append(img_res)
    return results, gts


@given(st.integers(0, 2**32 - 1))
def test_metrics_bounded_and_order_invariant(seed):
    results, gts = _random_case(seed)
    rng = np.random.default_rng(seed + 1)
    shuffled = [[img[i] for i in rng.permutation(len(img))] for img in results]
    for fn in (ap_p_vol, ap_r_vol, pcp50):
        v = fn(results, gts)
        assert 0.0 <= v <= 1.0
        assert v == fn(shuffled, gts)


@given(st.integers(0, 2**32 - 1))
def test_ap_p_non_increasing_in_t(seed):
    results, gts = _random_case(seed)
    values = [ap_p(results, gts, t) for t in VOL_THRESHOLDS]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_evaluate_records():
    gt = four_part_gt()
    records = evaluate([[result(gt.parts, 0.9)]], [[gt]])
    names = [(r.metric, r.threshold) for r in records]
    assert ("AP^p", 0.5) in names and ("AP^p_vol", None) in names and ("PCP", 0.5) in names
    assert ("AP^r_vol", None) in names
    assert all(r.value == 1.0 for r in records)
    pcp = next(r for r in records if r.metric == "PCP")
    assert (pcp.tp, pcp.fp, pcp.fn) == (1, 0, 0)
