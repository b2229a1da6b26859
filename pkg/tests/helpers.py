import math

import numpy as np


def box(shape, y0, y1, x0, x1):
    """Mask with rows y0..y1-1 and columns x0..x1-1 set."""
    m = np.zeros(shape, dtype=bool)
    m[y0:y1, x0:x1] = True
    return m


def random_mask(rng, shape, p=0.3):
    m = rng.random(shape) < p
    if not m.any():
        m[rng.integers(shape[0]), rng.integers(shape[1])] = True
    return m


def nms_oracle(masks, scores, method, sigma):
    """Scalar double loop of the decay formula on score-sorted input."""
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    m = [masks[i] for i in order]
    n = len(m)

    def f(x):
        return math.exp(-x * x / sigma) if method == "gaussian" else 1 - x

    def iou(a, b):
        u = np.logical_or(a, b).sum()
        return np.logical_and(a, b).sum() / u if u else 0.0

    out = []
    for j in range(n):
        d = 1.0
        for i in range(j):
            comp = max((iou(m[k], m[i]) for k in range(i)), default=0.0)
            if f(comp) == 0:
                continue
            d = min(d, f(iou(m[i], m[j])) / f(comp))
        out.append(scores[order[j]] * d)
    return out
