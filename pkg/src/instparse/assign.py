"""Grid label assignment: route instances to pyramid levels by scale and mark
the grid cells that carry each instance's category and mask targets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .masks import mass_center_extent
from .structures import HUMAN, PART, GroundTruthScene

DEFAULT_EPSILON = 0.2
MAX_CELLS = 9


@dataclass(frozen=True)
class LevelSpec:
    level_id: str
    grid: int
    scale_range: tuple[float | None, float | None] = (None, None)
    kind: str = PART

    def accepts(self, scale: float) -> bool:
        low, high = self.scale_range
        return (low is None or scale >= low) and (high is None or scale < high)


DEFAULT_LEVELS: tuple[LevelSpec, ...] = (
    LevelSpec("F1", 40, (None, 96), PART),
    LevelSpec("F2", 36, (48, 192), PART),
    LevelSpec("F3", 24, (96, 384), PART),
    LevelSpec("F4", 16, (192, None), PART),
    LevelSpec("F5", 20, (None, None), HUMAN),
)


@dataclass
class GridTargets:
    level_id: str
    grid: int
    category_target: np.ndarray
    mask_targets: dict[int, np.ndarray] = field(default_factory=dict)
    owners: dict[int, int] = field(default_factory=dict)

    def positive_cells(self) -> list[int]:
        return sorted(self.mask_targets)


def instance_scale(m) -> float:
    _, _, w, h = mass_center_extent(m)
    return math.sqrt(w * h)


def route_levels(scale: float, kind: str, specs=DEFAULT_LEVELS) -> list[str]:
    """Level ids (in ``specs`` order) responsible for an instance of this scale."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    levels = [s.level_id for s in specs if s.kind == kind and s.accepts(scale)]
    if not levels:
        raise ValueError(f"no {kind} level accepts scale {scale}")
    return levels


def _cell_span(lo: float, hi: float, size: int, grid: int) -> range:
    # cell k covers [k*size/grid, (k+1)*size/grid); the region [lo, hi] is closed
    first = min(max(math.floor(lo * grid / size), 0), grid - 1)
    last = min(max(math.floor(hi * grid / size), 0), grid - 1)
    return range(first, last + 1)


def _touching(cx, cy, w, h, grid, eps, image_size) -> list[tuple[int, int]]:
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    height, width = image_size
    rows = _cell_span(cy - eps * h / 2, cy + eps * h / 2, height, grid)
    cols = _cell_span(cx - eps * w / 2, cx + eps * w / 2, width, grid)
    return [(i, j) for i in rows for j in cols]


def region_cells(cx: float, cy: float, w: float, h: float, grid: int, eps: float, image_size) -> list[tuple[int, int]]:
    """Cells ``(i, j)`` (row, column) activated by a center region.

    The region is the closed box of size ``eps*w x eps*h`` centered on
    ``(cx, cy)``; every cell whose rectangle touches it qualifies. At most
    nine are kept: those whose centers are nearest ``(cx, cy)``, ties going
    to the earlier cell in row-major order.
    """
    cells = _touching(cx, cy, w, h, grid, eps, image_size)
    if len(cells) <= MAX_CELLS:
        return cells
    height, width = image_size

    def dist(cell):
        i, j = cell
        return ((j + 0.5) * width / grid - cx) ** 2 + ((i + 0.5) * height / grid - cy) ** 2

    return sorted(sorted(cells, key=lambda c: (dist(c), c))[:MAX_CELLS])


def candidate_cells(m, grid: int, eps: float, image_size=None) -> list[tuple[int, int]]:
    """Every cell touching the center region of ``m``, before the nine-cell cap."""
    if image_size is None:
        image_size = np.shape(m)
    return _touching(*mass_center_extent(m), grid, eps, image_size)


def activated_grids(m, grid: int, eps: float = DEFAULT_EPSILON, image_size=None) -> list[tuple[int, int]]:
    if image_size is None:
        image_size = np.shape(m)
    cx, cy, w, h = mass_center_extent(m)
    return region_cells(cx, cy, w, h, grid, eps, image_size)


def build_targets(scene: GroundTruthScene, specs=DEFAULT_LEVELS, eps: float = DEFAULT_EPSILON) -> list[GridTargets]:
    """Per-level category and mask targets for a scene.

    When two instances claim the same cell of a level the smaller-scale
    instance keeps it (ties: lower instance index). The nine-cell cap is
    applied per instance before resolving such collisions.
    """
    scales = [instance_scale(inst.mask) for inst in scene.instances]
    claims: dict[str, dict[int, tuple[float, int]]] = {s.level_id: {} for s in specs}
    by_id = {s.level_id: s for s in specs}

    for idx, inst in enumerate(scene.instances):
        for level_id in route_levels(scales[idx], inst.kind, specs):
            grid = by_id[level_id].grid
            level_claims = claims[level_id]
            for i, j in activated_grids(inst.mask, grid, eps, scene.image_size):
                key = (scales[idx], idx)
                cell = i * grid + j
                if cell not in level_claims or key < level_claims[cell]:
                    level_claims[cell] = key

    out = []
    for spec in specs:
        cat = np.zeros((spec.grid, spec.grid), dtype=np.int64)
        targets = GridTargets(spec.level_id, spec.grid, cat)
        for cell in sorted(claims[spec.level_id]):
            idx = claims[spec.level_id][cell][1]
            inst = scene.instances[idx]
            cat.flat[cell] = inst.category + 1
            targets.mask_targets[cell] = inst.mask
            targets.owners[cell] = idx
        out.append(targets)
    return out
