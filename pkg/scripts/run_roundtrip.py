"""Oracle round trip over a batch of synthetic scenes; prints the metric summary."""

import argparse
import time

from instparse.experiment import batch, summary
from instparse.grouping import GroupingConfig
from instparse.scenes import SceneConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenes", type=int, default=50)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--nms", choices=["gaussian", "linear"], default="gaussian")
    args = ap.parse_args()

    cfg = SceneConfig(image_size=(args.size, args.size), seed=args.seed)
    t0 = time.perf_counter()
    trips = batch(cfg, args.scenes, grouping=GroupingConfig(nms_method=args.nms), noise=args.noise, noise_seed=args.seed + 1)
    elapsed = time.perf_counter() - t0
    people = sum(len(t.gts) for t in trips)
    print(f"{args.scenes} scenes, {people} people, {elapsed:.1f}s")
    for name, value in summary(trips).items():
        print(f"{name:10s} {value:.4f}")


if __name__ == "__main__":
    main()
