"""Plain data records passed between the pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .masks import as_mask

HUMAN = "human"
PART = "part"


@dataclass(frozen=True)
class GroundTruthInstance:
    kind: str
    category: int
    mask: np.ndarray
    parent: int | None = None

    def __post_init__(self):
        if self.kind not in (HUMAN, PART):
            raise ValueError(f"unknown instance kind {self.kind!r}")
        if self.category < 0:
            raise ValueError("category must be >= 0")
        if self.kind == PART and self.parent is None:
            raise ValueError("a part needs a parent human")
        if self.kind == HUMAN and self.parent is not None:
            raise ValueError("a human cannot have a parent")
        object.__setattr__(self, "mask", as_mask(self.mask))


@dataclass(frozen=True)
class GroundTruthScene:
    image_size: tuple[int, int]
    instances: tuple[GroundTruthInstance, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))
        object.__setattr__(self, "instances", tuple(self.instances))
        self.validate()

    def validate(self):
        for idx, inst in enumerate(self.instances):
            if inst.mask.shape != self.image_size:
                raise ValueError(f"instance {idx}: mask shape {inst.mask.shape} != image {self.image_size}")
            if not inst.mask.any():
                raise ValueError(f"instance {idx}: empty mask")
            if inst.kind == PART:
                p = inst.parent
                if not 0 <= p < len(self.instances) or self.instances[p].kind != HUMAN:
                    raise ValueError(f"instance {idx}: parent {p} is not a human in this scene")

    def human_indices(self) -> list[int]:
        return [i for i, inst in enumerate(self.instances) if inst.kind == HUMAN]

    def part_indices(self, parent: int | None = None) -> list[int]:
        return [
            i
            for i, inst in enumerate(self.instances)
            if inst.kind == PART and (parent is None or inst.parent == parent)
        ]


@dataclass
class ScoredInstance:
    """A candidate mask with its category and confidence."""

    mask: np.ndarray
    category: int
    score: float


@dataclass
class ParsingResult:
    """One parsed person.

    ``category_map`` holds ``category + 1`` per pixel and 0 where no part
    claimed the pixel, so its support is the final person mask.
    """

    human_mask: np.ndarray
    category_map: np.ndarray
    parsing_score: float
    human_score: float = 0.0
    part_indices: list[int] = field(default_factory=list)

    @property
    def mask(self) -> np.ndarray:
        return self.category_map > 0

    def part_mask(self, category: int) -> np.ndarray:
        return self.category_map == category + 1
