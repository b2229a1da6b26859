"""How the metrics degrade as uniform noise is added to the oracle outputs."""

import argparse

from instparse.experiment import batch, summary
from instparse.scenes import SceneConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenes", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--levels", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.2, 0.3, 0.5])
    args = ap.parse_args()

    cfg = SceneConfig(image_size=(128, 128), humans=(2, 4), parts_per_human=(2, 4), seed=args.seed)
    header = None
    for noise in args.levels:
        s = summary(batch(cfg, args.scenes, noise=noise, noise_seed=args.seed + 1))
        if header is None:
            header = "noise   " + "  ".join(f"{k:>8s}" for k in s)
            print(header)
        print(f"{noise:<7.3f} " + "  ".join(f"{v:8.4f}" for v in s.values()))


if __name__ == "__main__":
    main()
