"""Command-line entry point: ``regionlab <command> [--flags]``.

Each command composes the hydra configuration of its application under
regionlab/algos/<command>/configs/ and applies the flags on top of it.
"""
import argparse
import os
import sys

from hydra import compose, initialize_config_dir
from omegaconf import OmegaConf, open_dict

from regionlab.algos.analyze.analyze import cmd_analyze
from regionlab.algos.angles.angles import cmd_angles
from regionlab.algos.attack.attack import cmd_attack
from regionlab.algos.region.region import cmd_region
from regionlab.algos.slice.slice import cmd_slice
from regionlab.algos.train.train import cmd_train
from regionlab.models.errors import RegionLabError

COMMANDS = {
    "train": cmd_train,
    "analyze": cmd_analyze,
    "region": cmd_region,
    "slice": cmd_slice,
    "attack": cmd_attack,
    "angles": cmd_angles,
}
VARIANT_ALIASES = {"bn": "batchnorm", "batchnorm": "batchnorm", "vanilla": "vanilla", "dropout": "dropout"}
ALGOS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "algos")


def _ints(text):
    return [int(value) for value in str(text).split(",") if value]


def _add_common(parser, model=True):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--spiral", action="store_true", help="use the 2D spiral dataset (default)")
    group.add_argument("--mnist", metavar="DIR", help="use the MNIST IDX files in DIR")
    parser.add_argument("--config", help="configuration name, overrides the dataset choice")
    parser.add_argument("--output", help="run directory")
    parser.add_argument("--seed", type=int)
    if model:
        parser.add_argument("--model", help="model JSON file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra hydra override")


def _add_pgd(parser):
    parser.add_argument("--eps", type=float, help="L-infinity attack radius")
    parser.add_argument("--pgd-steps", type=float, help="PGD step size")
    parser.add_argument("--pgd-iters", type=int)
    parser.add_argument("--restarts", type=int)
    parser.add_argument("--threads", help="worker count or 'auto'")


def build_parser():
    parser = argparse.ArgumentParser(prog="regionlab", description="Linear region analysis of ReLU networks")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a network and export it")
    _add_common(train, model=False)
    train.add_argument("--variant", choices=sorted(VARIANT_ALIASES))
    train.add_argument("--hidden", type=_ints, help="comma-separated hidden widths")
    train.add_argument("--lr", type=float)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--epochs", type=int)
    train.add_argument("--patience", type=int)
    train.add_argument("--dropout", type=float)
    train.add_argument("--init", choices=["xavier", "orthogonal"])

    analyze = sub.add_parser("analyze", help="sweep the region analyses over test points")
    _add_common(analyze)
    _add_pgd(analyze)
    analyze.add_argument("--points", type=int)
    analyze.add_argument("--reduce", action="store_true")
    analyze.add_argument("--epsilon-ray", type=float)
    analyze.add_argument("--directions", type=int)
    analyze.add_argument("--resolution", type=int)

    region = sub.add_parser("region", help="extract the region of one point")
    _add_common(region)
    region.add_argument("--point", help="dataset index or comma-separated vector")
    region.add_argument("--reduce", action="store_true")

    slice_ = sub.add_parser("slice", help="render 2D slices of the input space")
    _add_common(slice_, model=False)
    slice_.add_argument("--model", action="append", dest="models", help="model JSON file, repeatable")
    slice_.add_argument("--toy2d", action="store_true", help="slice the full [-1, 1]^2 input plane")
    slice_.add_argument("--points", help="three comma-separated point ids spanning the plane")
    slice_.add_argument("--resolution", type=_ints, help="W,H or a single size")
    slice_.add_argument("--format", action="append", dest="formats", choices=["ppm", "svg"])

    attack = sub.add_parser("attack", help="PGD attack on sampled test points")
    _add_common(attack)
    _add_pgd(attack)
    attack.add_argument("--points", type=int)

    angles = sub.add_parser("angles", help="hyperplane angle matrix of one region")
    _add_common(angles)
    angles.add_argument("--point", help="dataset index or comma-separated vector")
    return parser


def flag_updates(args):
    """(config key, value) pairs for every flag given on the command line"""
    updates = []

    def put(key, value):
        if value is not None:
            updates.append((key, value))

    put("output_dir", args.output)
    put("algorithm.seed", args.seed)
    if args.mnist:
        put("dataset.path", os.path.abspath(args.mnist))
    put("model_path", getattr(args, "model", None))
    command = args.command
    if command == "train":
        put("algorithm.variant", VARIANT_ALIASES.get(args.variant) if args.variant else None)
        put("algorithm.hidden_widths", args.hidden)
        put("optimizer.lr", args.lr)
        put("algorithm.batch_size", args.batch_size)
        put("algorithm.max_epochs", args.epochs)
        put("algorithm.patience", args.patience)
        put("algorithm.dropout_rate", args.dropout)
        put("algorithm.init", args.init)
    if command in ("analyze", "attack"):
        put("algorithm.points", args.points)
        put("algorithm.threads", args.threads)
        put("algorithm.pgd.eps", args.eps)
        put("algorithm.pgd.step", args.pgd_steps)
        put("algorithm.pgd.iters", args.pgd_iters)
        put("algorithm.pgd.restarts", args.restarts)
    if command == "analyze":
        put("algorithm.reduce", True if args.reduce else None)
        put("algorithm.epsilon_ray", args.epsilon_ray)
        put("algorithm.directions", args.directions)
        put("algorithm.resolution", args.resolution)
    if command in ("region", "angles"):
        put("point", args.point)
    if command == "region":
        put("reduce", True if args.reduce else None)
    if command == "slice":
        put("model_paths", args.models)
        put("formats", args.formats)
        if args.toy2d:
            put("plane.kind", "toy2d")
        if args.points:
            put("plane.kind", "points")
            put("plane.points", [value for value in args.points.split(",") if value])
        if args.resolution:
            put("plane.resolution", args.resolution * 2 if len(args.resolution) == 1 else args.resolution)
    return updates


def load_config(command, config_name, overrides=(), updates=(), config_dir=None):
    config_dir = config_dir or os.path.join(ALGOS_DIR, command, "configs")
    with initialize_config_dir(config_dir=config_dir, version_base="1.2"):
        cfg = compose(config_name=config_name, overrides=list(overrides))
    with open_dict(cfg):
        for key, value in updates:
            OmegaConf.update(cfg, key, value, merge=False)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_name = args.config or f"{args.command}_{'mnist' if args.mnist else 'spiral'}"
    try:
        cfg = load_config(args.command, config_name, args.set, flag_updates(args))
        return COMMANDS[args.command](cfg)
    except (RegionLabError, FileNotFoundError, ValueError) as error:
        print(f"regionlab {args.command}: {type(error).__name__}: {error}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
