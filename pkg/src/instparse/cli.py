"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 I/O or file-format error,
3 validation error (bad values, failed checks).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import tensorio
from .assign import DEFAULT_EPSILON, DEFAULT_LEVELS, LevelSpec, build_targets
from .experiment import RoundTrip, roundtrip, summary
from .gradcheck import run_checks
from .grouping import GroupingConfig, run_pipeline
from .metrics import evaluate
from .rng import split
from .scenes import SceneConfig, generate_scene, oracle_outputs, perturb
from .synthesis import DEFAULT_MASK_THRESHOLD, combine_masks, decode

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def load_levels(path) -> tuple[LevelSpec, ...]:
    """Level table from JSON: a list of ``{level_id, grid, scale_range, kind}``."""
    doc = json.loads(Path(path).read_text())
    try:
        return tuple(
            LevelSpec(e["level_id"], int(e["grid"]), tuple(e.get("scale_range", (None, None))), e["kind"]) for e in doc
        )
    except (KeyError, TypeError) as e:
        raise tensorio.ManifestError(f"{path}: malformed level table ({e})") from e


def _scene_config(args) -> SceneConfig:
    return SceneConfig(
        image_size=(args.height, args.width),
        humans=tuple(args.humans),
        parts_per_human=tuple(args.parts),
        shapes=tuple(args.shapes),
        occlusion=args.occlusion,
        num_categories=args.categories,
        seed=args.seed,
        mask_stride=args.mask_stride,
    )


def _grouping_config(args) -> GroupingConfig:
    return GroupingConfig(
        n_part=args.n_part,
        s_part=args.s_part,
        s_human=args.s_human,
        r_human=args.r_human,
        nms_method=args.nms,
        nms_sigma=args.nms_sigma,
        n_human=args.n_human,
    )


def cmd_gen_scene(args) -> int:
    cfg = _scene_config(args)
    scene = generate_scene(cfg)
    tensorio.write_scene(args.out, scene)
    if args.outputs:
        outputs = oracle_outputs(scene, eps=cfg.eps, mask_stride=cfg.mask_stride, num_categories=cfg.num_categories)
        tensorio.write_outputs(args.outputs, perturb(outputs, args.noise, args.noise_seed))
    print(f"wrote {len(scene.instances)} instances to {args.out}")
    return EXIT_OK


def cmd_assign(args) -> int:
    scene = tensorio.read_scene(args.scene)
    specs = load_levels(args.levels) if args.levels else DEFAULT_LEVELS
    out = Path(args.out)
    levels = []
    for spec, tgt in zip(specs, build_targets(scene, specs, args.eps)):
        rel = f"{out.stem}_{spec.level_id}_category.nthp"
        tensorio.write_tensor(out.parent / rel, tgt.category_target.astype("float32"))
        cells = [
            {"cell": c, "i": c // spec.grid, "j": c % spec.grid, "category": int(tgt.category_target.flat[c]) - 1, "instance": tgt.owners[c]}
            for c in tgt.positive_cells()
        ]
        levels.append({"level_id": spec.level_id, "kind": spec.kind, "grid": spec.grid, "category_file": rel, "cells": cells})
    tensorio.atomic_write_text(out, json.dumps({"eps": args.eps, "levels": levels}, indent=2, sort_keys=True) + "\n")
    print(f"assigned {sum(len(lv['cells']) for lv in levels)} cells across {len(levels)} levels")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    if args.outputs:
        if not args.candidates:
            raise UsageError("--outputs needs --candidates")
        outputs = tensorio.read_outputs(args.outputs)
        parts, humans = decode(outputs, args.t_bin)
        tensorio.write_candidates(args.candidates, outputs.image_size, parts, humans)
        print(f"{len(parts)} part and {len(humans)} human candidates")
        return EXIT_OK
    if not (args.prototypes and args.coefficients and args.out):
        raise UsageError("need --prototypes, --coefficients and --out (or --outputs)")
    P = tensorio.read_tensor(args.prototypes, expect=tensorio.FLOAT32)
    F = tensorio.read_tensor(args.coefficients, expect=tensorio.FLOAT32)
    masks = combine_masks(P, F)
    tensorio.write_tensor(args.out, masks)
    print(f"wrote masks {masks.shape} to {args.out}")
    return EXIT_OK


def cmd_group(args) -> int:
    image_size, parts, humans = tensorio.read_candidates(args.candidates)
    results = run_pipeline(parts, humans, _grouping_config(args))
    tensorio.write_results(args.out, image_size, results)
    print(f"{len(results)} parsed humans")
    return EXIT_OK


def cmd_eval(args) -> int:
    if len(args.scene) != len(args.results):
        raise UsageError("give one --results file per --scene file")
    gts = [tensorio.gt_from_scene_file(p) for p in args.scene]
    results = [tensorio.read_results(p) for p in args.results]
    records = evaluate(results, gts)
    if args.out:
        tensorio.write_report(args.out, records)
    for r in records:
        print(json.dumps(r.as_dict(), sort_keys=True))
    return EXIT_OK


def cmd_loss_check(args) -> int:
    checks = run_checks(args.seed, args.points)
    for c in checks:
        print(f"{c.name}: points={c.points} max_rel_err={c.worst:.3e} {'PASS' if c.passed else 'FAIL'}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION


def _write_trip(directory: Path, trip: RoundTrip, keep_outputs: bool):
    tensorio.write_scene(directory / "scene.json", trip.scene)
    tensorio.write_candidates(directory / "candidates.json", trip.scene.image_size, trip.parts, trip.humans)
    tensorio.write_results(directory / "results.json", trip.scene.image_size, trip.results)
    if keep_outputs:
        tensorio.write_outputs(directory / "outputs", trip.outputs)


def cmd_demo(args) -> int:
    base = _scene_config(args)
    grouping = _grouping_config(args)
    out = Path(args.out)
    trips = []
    for i in range(args.scenes):
        cfg = replace(base, seed=split(args.seed, i))
        trip = roundtrip(cfg, grouping, noise=args.noise, noise_seed=split(args.seed + 1, i), t_bin=args.t_bin)
        _write_trip(out / f"scene_{i:03d}", trip, args.keep_outputs)
        trips.append(trip)
    tensorio.write_report(out / "report.jsonl", evaluate([t.results for t in trips], [t.gts for t in trips]))
    for name, value in summary(trips).items():
        print(f"{name} = {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="instparse", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scene_flags(sp, seed_default=0):
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--height", type=int, default=256)
        sp.add_argument("--width", type=int, default=256)
        sp.add_argument("--humans", type=int, nargs=2, default=(2, 6), metavar=("MIN", "MAX"))
        sp.add_argument("--parts", type=int, nargs=2, default=(2, 5), metavar=("MIN", "MAX"))
        sp.add_argument("--shapes", nargs="+", default=["rectangle", "ellipse"], choices=["rectangle", "ellipse"])
        sp.add_argument("--occlusion", type=_fraction, default=0.3)
        sp.add_argument("--categories", type=int, default=6)
        sp.add_argument("--mask-stride", type=int, default=4)

    def grouping_flags(sp):
        d = GroupingConfig()
        sp.add_argument("--n-part", type=int, default=d.n_part)
        sp.add_argument("--s-part", type=_fraction, default=d.s_part, help="default 1/3")
        sp.add_argument("--s-human", type=_fraction, default=d.s_human)
        sp.add_argument("--r-human", type=_fraction, default=d.r_human, help="default 2/3")
        sp.add_argument("--nms", choices=["gaussian", "linear"], default=d.nms_method)
        sp.add_argument("--nms-sigma", type=float, default=d.nms_sigma)
        sp.add_argument("--n-human", type=int, default=d.n_human)

    sp = sub.add_parser("gen-scene", help="generate a synthetic scene")
    scene_flags(sp)
    sp.add_argument("--out", required=True, help="scene manifest path")
    sp.add_argument("--outputs", help="also write oracle network outputs to this directory")
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--noise-seed", type=int, default=0)
    sp.set_defaults(func=cmd_gen_scene)

    sp = sub.add_parser("assign", help="grid label assignment for a scene")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--out", required=True, help="targets manifest path")
    sp.add_argument("--eps", type=float, default=DEFAULT_EPSILON)
    sp.add_argument("--levels", help="JSON level table overriding the defaults")
    sp.set_defaults(func=cmd_assign)

    sp = sub.add_parser("synthesize", help="prototypes x coefficients -> soft masks, or outputs -> candidates")
    sp.add_argument("--prototypes")
    sp.add_argument("--coefficients")
    sp.add_argument("--out")
    sp.add_argument("--outputs", help="network outputs directory (decode to candidates)")
    sp.add_argument("--candidates", help="candidates manifest to write")
    sp.add_argument("--t-bin", type=float, default=DEFAULT_MASK_THRESHOLD)
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("group", help="group part candidates into parsed humans")
    sp.add_argument("--candidates", required=True)
    sp.add_argument("--out", required=True, help="results manifest path")
    grouping_flags(sp)
    sp.set_defaults(func=cmd_group)

    sp = sub.add_parser("eval", help="score results against ground truth")
    sp.add_argument("--scene", nargs="+", required=True)
    sp.add_argument("--results", nargs="+", required=True)
    sp.add_argument("--out", help="write the JSON-lines report here")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("loss-check", help="finite-difference gradient checks")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--points", type=int, default=20)
    sp.set_defaults(func=cmd_loss_check)

    sp = sub.add_parser("demo", help="full oracle round trip")
    scene_flags(sp, seed_default=7)
    grouping_flags(sp)
    sp.add_argument("--scenes", type=int, default=1)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--t-bin", type=float, default=DEFAULT_MASK_THRESHOLD)
    sp.add_argument("--out", default="demo_out")
    sp.add_argument("--keep-outputs", action="store_true", help="also write the oracle network outputs")
    sp.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, tensorio.TensorFormatError, tensorio.ManifestError) as e:
        print(f"error [{getattr(e, 'code', 'io')}]: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
