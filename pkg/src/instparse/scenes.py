"""Toy scenes with known ground truth, and fabricated network outputs that
reproduce them exactly.

A "human" is a stack of horizontal bands, one part per band, each drawn as a
rectangle or an ellipse. Shapes are drawn on a lattice ``mask_stride`` times
coarser than the image and upsampled, so they are exactly representable by
prototypes at the coarse resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .assign import DEFAULT_EPSILON, DEFAULT_LEVELS, build_targets
from .masks import downsample_mask, upsample_mask
from .rng import SplitMix64
from .structures import HUMAN, PART, GroundTruthInstance, GroundTruthScene
from .synthesis import DEFAULT_NUM_PROTOTYPES, LevelOutputs, NetworkOutputs

ORACLE_LOGIT = 10.0
SHAPES = ("rectangle", "ellipse")
MIN_BAND = 3

OracleOutputs = NetworkOutputs


class SceneGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneConfig:
    image_size: tuple[int, int] = (256, 256)
    humans: tuple[int, int] = (2, 6)
    parts_per_human: tuple[int, int] = (2, 5)
    shapes: tuple[str, ...] = SHAPES
    occlusion: float = 0.3
    num_categories: int = 6
    seed: int = 0
    mask_stride: int = 4
    eps: float = DEFAULT_EPSILON
    max_part_cells: int = 200
    max_human_cells: int = 100
    max_retries: int = 200

    def __post_init__(self):
        H, W = self.image_size
        if H % self.mask_stride or W % self.mask_stride:
            raise ValueError(f"image size {self.image_size} must be a multiple of mask_stride {self.mask_stride}")
        if self.num_categories < 1:
            raise ValueError("num_categories must be >= 1")
        lo, hi = self.parts_per_human
        if not 1 <= lo <= hi:
            raise ValueError(f"bad parts_per_human range {self.parts_per_human}")
        if hi > self.num_categories:
            raise ValueError("parts within a human get distinct categories: need num_categories >= max parts")
        if not 0 <= self.humans[0] <= self.humans[1]:
            raise ValueError(f"bad humans range {self.humans}")
        if not set(self.shapes) <= set(SHAPES) or not self.shapes:
            raise ValueError(f"shapes must be drawn from {SHAPES}")
        if not 0.0 <= self.occlusion <= 1.0:
            raise ValueError("occlusion must be a probability")
        if MIN_BAND * hi > H // self.mask_stride:
            raise ValueError("image too small for the requested parts per human")


def _ellipse(rows: int, cols: int) -> np.ndarray:
    y = (np.arange(rows) - (rows - 1) / 2) / (rows / 2)
    x = (np.arange(cols) - (cols - 1) / 2) / (cols / 2)
    return (y[:, None] ** 2 + x[None, :] ** 2) <= 1.0


def _draw_body(rng: SplitMix64, cfg: SceneConfig, n_parts: int, lattice) -> list[tuple[int, np.ndarray]]:
    h, w = lattice
    bh_lo = max(MIN_BAND * n_parts, h // 5)
    bh = rng.integer(min(bh_lo, h), min(max(bh_lo, h // 2), h))
    bw = rng.integer(min(max(3, w // 12), w), min(max(3, w // 5), w))
    top = rng.integer(0, h - bh)
    left = rng.integer(0, w - bw)

    # band heights: MIN_BAND each plus a random share of the slack
    slack = bh - MIN_BAND * n_parts
    cuts = sorted(rng.integer(0, slack) for _ in range(n_parts - 1))
    shares = np.diff([0, *cuts, slack])
    categories = rng.sample(range(cfg.num_categories), n_parts)

    parts = []
    row = top
    for share, cat in zip(shares, categories):
        rows = MIN_BAND + int(share)
        pw = rng.integer((bw + 1) // 2, bw)
        pl = left + rng.integer(0, bw - pw)
        shape = rng.choice(cfg.shapes)
        m = np.zeros(lattice, dtype=bool)
        if shape == "rectangle":
            m[row : row + rows, pl : pl + pw] = True
        else:
            m[row : row + rows, pl : pl + pw] = _ellipse(rows, pw)
        parts.append((cat, m))
        row += rows
    return parts


def _try_scene(rng: SplitMix64, cfg: SceneConfig) -> list[list[tuple[int, np.ndarray]]] | None:
    lattice = (cfg.image_size[0] // cfg.mask_stride, cfg.image_size[1] // cfg.mask_stride)
    occupied = np.zeros(lattice, dtype=bool)
    people: list[list[tuple[int, np.ndarray]]] = []
    for _ in range(rng.integer(*cfg.humans)):
        n_parts = rng.integer(*cfg.parts_per_human)
        for _attempt in range(50):
            body = _draw_body(rng, cfg, n_parts, lattice)
            union = np.logical_or.reduce([m for _, m in body])
            front = rng.uniform() < cfg.occlusion
            if (union & occupied).any():
                if not front:
                    continue
                # the new person stands in front; everyone behind keeps >= half of each part
                if any(
                    np.count_nonzero(m & ~union) * 2 < np.count_nonzero(m) for person in people for _, m in person
                ):
                    continue
                people = [[(c, m & ~union) for c, m in person] for person in people]
            people.append(body)
            occupied |= union
            break
        else:
            return None
    return people


def _to_scene(people, cfg: SceneConfig) -> GroundTruthScene:
    instances = []
    for person in people:
        h_idx = len(instances)
        union = np.logical_or.reduce([m for _, m in person])
        instances.append(GroundTruthInstance(HUMAN, 0, upsample_mask(union, cfg.mask_stride)))
        for cat, m in person:
            instances.append(GroundTruthInstance(PART, int(cat), upsample_mask(m, cfg.mask_stride), parent=h_idx))
    return GroundTruthScene(cfg.image_size, instances)


def well_posed(scene: GroundTruthScene, cfg: SceneConfig, specs=DEFAULT_LEVELS) -> bool:
    """Whether the oracle can reproduce the scene exactly.

    Every instance must own at least one grid cell after collisions, and
    the number of part and human candidates must fit the grouping caps.
    """
    targets = build_targets(scene, specs, cfg.eps)
    kinds = {s.level_id: s.kind for s in specs}
    owned = set()
    counts = {HUMAN: 0, PART: 0}
    for t in targets:
        owned.update(t.owners.values())
        counts[kinds[t.level_id]] += len(t.owners)
    return (
        len(owned) == len(scene.instances)
        and counts[PART] <= cfg.max_part_cells
        and counts[HUMAN] <= cfg.max_human_cells
    )


def generate_scene(cfg: SceneConfig = SceneConfig()) -> GroundTruthScene:
    rng = SplitMix64(cfg.seed)
    for _ in range(cfg.max_retries):
        people = _try_scene(rng, cfg)
        if people is None:
            continue
        scene = _to_scene(people, cfg)
        if well_posed(scene, cfg):
            return scene
    raise SceneGenerationError(f"no feasible scene for seed {cfg.seed} after {cfg.max_retries} attempts")


def num_part_categories(scene: GroundTruthScene) -> int:
    cats = [inst.category for inst in scene.instances if inst.kind == PART]
    return max(cats) + 1 if cats else 1


def oracle_outputs(
    scene: GroundTruthScene,
    specs=DEFAULT_LEVELS,
    eps: float = DEFAULT_EPSILON,
    num_prototypes: int = DEFAULT_NUM_PROTOTYPES,
    mask_stride: int = 4,
    num_categories: int | None = None,
) -> NetworkOutputs:
    """Fabricate network outputs whose decoding reproduces ``scene``.

    Prototype ``k`` is +-ORACLE_LOGIT over instance ``k``'s mask (zero for
    unused prototypes); coefficients are one-hot on the owning instance at
    each target cell; category scores are 1.0 for the true class there.
    """
    n = len(scene.instances)
    if n > num_prototypes:
        raise ValueError(f"{n} instances exceed {num_prototypes} prototypes")
    H, W = scene.image_size
    if H % mask_stride or W % mask_stride:
        raise ValueError(f"image size {scene.image_size} not divisible by mask stride {mask_stride}")
    protos = np.zeros((num_prototypes, H // mask_stride, W // mask_stride))
    for k, inst in enumerate(scene.instances):
        coarse = downsample_mask(inst.mask, mask_stride)
        if not np.array_equal(upsample_mask(coarse, mask_stride), inst.mask):
            raise ValueError(f"instance {k} is not aligned to the {mask_stride}-pixel lattice")
        protos[k] = np.where(coarse, ORACLE_LOGIT, -ORACLE_LOGIT)

    n_cat = num_categories or num_part_categories(scene)
    levels = []
    for spec, tgt in zip(specs, build_targets(scene, specs, eps)):
        S = spec.grid
        coeff = np.zeros((num_prototypes, S, S))
        cat = np.zeros((1 if spec.kind == HUMAN else n_cat, S, S))
        for cell, owner in tgt.owners.items():
            i, j = divmod(cell, S)
            coeff[owner, i, j] = 1.0
            cat[scene.instances[owner].category, i, j] = 1.0
        levels.append(LevelOutputs(spec.level_id, spec.kind, coeff, cat))
    return NetworkOutputs(scene.image_size, mask_stride, protos, levels)


def perturb(outputs: NetworkOutputs, noise_scale: float, seed: int) -> NetworkOutputs:
    """Add uniform ``[-noise_scale, noise_scale)`` noise to coefficients and
    category scores (the latter clipped to [0, 1]), level by level."""
    if noise_scale < 0:
        raise ValueError("noise_scale must be >= 0")
    if noise_scale == 0:
        return outputs
    rng = SplitMix64(seed)

    def noisy(a):
        u = rng.uniform_block(a.size).reshape(a.shape)
        return a + noise_scale * (2.0 * u - 1.0)

    levels = []
    for lv in outputs.levels:
        coeff = noisy(lv.coefficients)
        cat = np.clip(noisy(lv.category), 0.0, 1.0)
        levels.append(replace(lv, coefficients=coeff, category=cat))
    return replace(outputs, levels=levels)
