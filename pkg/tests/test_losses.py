import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from instparse.assign import build_targets
from instparse.gradcheck import random_dice_point, random_focal_point, run_checks
from instparse.losses import LevelPrediction, dice_loss, focal_loss, total_loss
from instparse.masks import downsample_mask
from instparse.scenes import SceneConfig, generate_scene
from instparse.structures import GroundTruthScene


def fd(f, x, h=1e-4):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        a, b = x.copy(), x.copy()
        a[idx] += h
        b[idx] -= h
        g[idx] = (f(a) - f(b)) / (2 * h)
    return g


def focal_oracle(p, target, gamma=2.0, alpha=0.25):
    C, S, _ = p.shape
    total = 0.0
    for c in range(C):
        for i in range(S):
            for j in range(S):
                positive = target[i, j] == c + 1
                pt = p[c, i, j] if positive else 1 - p[c, i, j]
                at = alpha if positive else 1 - alpha
                total += -at * (1 - pt) ** gamma * math.log(pt)
    return total / (np.count_nonzero(target) + 1)


def test_focal_closed_form():
    value, _ = focal_loss(np.full((1, 1, 1), 0.5), np.ones((1, 1), dtype=int), gamma=0.0, alpha=0.5)
    # one positive cell, so the term 0.5*ln2 is divided by 2
    assert value == pytest.approx(0.5 * math.log(2) / 2)


def test_focal_perfect_is_zero():
    target = np.array([[0, 2], [1, 0]])
    pred = np.zeros((2, 2, 2))
    pred[1, 0, 1] = 1.0
    pred[0, 1, 0] = 1.0
    value, grad = focal_loss(pred, target)
    assert value == 0.0
    assert np.isfinite(grad).all()


def test_focal_infinite_raises():
    with pytest.raises(ValueError):
        focal_loss(np.zeros((1, 1, 1)), np.ones((1, 1), dtype=int))
    with pytest.raises(ValueError):
        focal_loss(np.full((1, 1, 1), 1.5), np.zeros((1, 1), dtype=int))


@pytest.mark.parametrize("gamma,alpha", [(2.0, 0.25), (0.0, 0.5), (0.5, 0.3), (1.0, 0.9)])
def test_focal_matches_loop(rng, gamma, alpha):
    pred, target = random_focal_point(rng, classes=3, grid=4)
    value, grad = focal_loss(pred, target, gamma, alpha)
    assert value == pytest.approx(focal_oracle(pred, target, gamma, alpha), rel=1e-12)
    num = fd(lambda p: focal_oracle(p, target, gamma, alpha), pred)
    assert np.abs(grad - num).max() / np.abs(num).max() < 1e-4


@given(st.integers(0, 2**32 - 1))
def test_focal_nonnegative(seed):
    pred, target = random_focal_point(np.random.default_rng(seed))
    assert focal_loss(pred, target)[0] >= 0


def test_dice_identity():
    g = np.zeros((6, 6))
    g[1:4, 2:5] = 1
    value, grad = dice_loss(g, g.astype(bool))
    assert value < 1e-6
    assert np.abs(grad).max() < 1e-6


def test_dice_disjoint():
    p = np.zeros((4, 4))
    p[:2] = 0.9
    g = np.zeros((4, 4), dtype=bool)
    g[2:] = True
    assert dice_loss(p, g)[0] == pytest.approx(1.0)


def test_dice_shape_mismatch():
    with pytest.raises(ValueError):
        dice_loss(np.zeros((2, 2)), np.zeros((2, 3)))


def test_dice_gradient(rng):
    for _ in range(5):
        pred, gt = random_dice_point(rng)
        _, grad = dice_loss(pred, gt)
        num = fd(lambda p: dice_loss(p, gt)[0], pred)
        assert np.abs(grad - num).max() / np.abs(num).max() < 1e-4


@given(st.integers(0, 2**32 - 1))
def test_dice_bounds(seed):
    pred, gt = random_dice_point(np.random.default_rng(seed))
    assert 0.0 <= dice_loss(pred, gt)[0] <= 1.0


def test_run_checks_pass():
    assert all(c.passed for c in run_checks(seed=3, points=5))


def _setup(seed=0, stride=4):
    cfg = SceneConfig(image_size=(128, 128), humans=(1, 2), parts_per_human=(2, 3), seed=seed, mask_stride=stride)
    scene = generate_scene(cfg)
    return scene, build_targets(scene)


def _random_preds(rng, targets, classes=6, h=32):
    return [
        LevelPrediction(
            t.level_id,
            rng.uniform(0.05, 0.95, size=(1 if t.level_id == "F5" else classes, t.grid, t.grid)),
            rng.uniform(0.05, 0.95, size=(t.grid * t.grid, h, h)),
        )
        for t in targets
    ]


def test_total_compositional(rng):
    _, targets = _setup()
    preds = _random_preds(rng, targets)
    report = total_loss(preds, targets, mask_stride=4)
    cls = {"part": 0.0, "human": 0.0}
    dice = {"part": [], "human": []}
    for p, t in zip(preds, targets):
        branch = "human" if t.level_id == "F5" else "part"
        cls[branch] += focal_loss(p.category, t.category_target)[0]
        for cell in t.positive_cells():
            dice[branch].append(dice_loss(p.masks[cell], downsample_mask(t.mask_targets[cell], 4))[0])
    assert report.cls_part == pytest.approx(cls["part"], rel=1e-12)
    assert report.cls_human == pytest.approx(cls["human"], rel=1e-12)
    assert report.mask_part == pytest.approx(np.mean(dice["part"]), rel=1e-12)
    assert report.mask_human == pytest.approx(np.mean(dice["human"]), rel=1e-12)
    expected = report.cls_part + 3 * report.mask_part + report.cls_human + 3 * report.mask_human
    assert abs(report.total - expected) < 1e-9


def test_total_order_invariant(rng):
    _, targets = _setup(seed=2)
    preds = _random_preds(rng, targets)
    a = total_loss(preds, targets, mask_stride=4)
    b = total_loss(preds[::-1], targets[::-1], mask_stride=4)
    assert a == b


def test_total_oracle_predictions_near_zero():
    _, targets = _setup(seed=1)
    preds = []
    for t in targets:
        C = 1 if t.level_id == "F5" else 6
        cat = np.zeros((C, t.grid, t.grid))
        for cell in t.positive_cells():
            cat[t.category_target.flat[cell] - 1].flat[cell] = 1.0
        masks = np.zeros((t.grid * t.grid, 32, 32))
        for cell, m in t.mask_targets.items():
            masks[cell] = downsample_mask(m, 4)
        preds.append(LevelPrediction(t.level_id, cat, masks))
    report = total_loss(preds, targets, mask_stride=4)
    assert report.total < 1e-6


def test_total_no_positives(rng):
    targets = build_targets(GroundTruthScene((128, 128), []))
    report = total_loss(_random_preds(rng, targets), targets, mask_stride=4)
    assert report.mask_part == 0.0 and report.mask_human == 0.0
    assert report.cls_part > 0 and report.cls_human > 0


def test_total_level_mismatch(rng):
    _, targets = _setup()
    with pytest.raises(ValueError):
        total_loss(_random_preds(rng, targets)[:-1], targets, mask_stride=4)
