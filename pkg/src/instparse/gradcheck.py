"""Central finite-difference checks for the loss gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import dice_loss, focal_loss

FD_STEP = 1e-4
REL_TOL = 1e-4


def numeric_gradient(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(x)
        flat[i] = orig - h
        lo = f(x)
        flat[i] = orig
        g[i] = (hi - lo) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``max|a - n| / max(max|a|, max|n|)``; 0 when both vanish."""
    scale = max(np.abs(analytic).max(), np.abs(numeric).max())
    if scale == 0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)


@dataclass
class CheckResult:
    name: str
    points: int
    worst: float

    @property
    def passed(self) -> bool:
        return self.worst < REL_TOL


def random_focal_point(rng: np.random.Generator, classes: int = 3, grid: int = 5):
    pred = rng.uniform(0.05, 0.95, size=(classes, grid, grid))
    target = rng.integers(0, classes + 1, size=(grid, grid))
    return pred, target


def random_dice_point(rng: np.random.Generator, size: int = 8):
    pred = rng.uniform(0.05, 0.95, size=(size, size))
    gt = rng.random((size, size)) < 0.4
    return pred, gt


def run_checks(seed: int = 0, points: int = 20) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst_focal = worst_dice = 0.0
    for _ in range(points):
        pred, target = random_focal_point(rng)
        _, grad = focal_loss(pred, target)
        num = numeric_gradient(lambda p: focal_loss(p, target)[0], pred.copy())
        worst_focal = max(worst_focal, relative_error(grad, num))

        pred, gt = random_dice_point(rng)
        _, grad = dice_loss(pred, gt)
        num = numeric_gradient(lambda p: dice_loss(p, gt)[0], pred.copy())
        worst_dice = max(worst_dice, relative_error(grad, num))
    return [CheckResult("focal_loss", points, worst_focal), CheckResult("dice_loss", points, worst_dice)]
