"""Command-line entry point: ``dpc {train,gradcheck,diagnose,gen-data,inject-noise}``.

Exit codes: 0 success, 1 runtime failure, 2 configuration/input error.
"""

import argparse
import logging
import sys

from . import gradcheck
from .config import ConfigError, load_spec
from .data import make_blobs, make_rings, read_csv, write_csv
from .experiment import diagnose, run_experiment
from .noise import inject

log = logging.getLogger("dpc")


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def cmd_train(args):
    overrides = list(args.set or [])
    if args.output:
        overrides.append(f'output_dir="{args.output}"')
    spec = load_spec(args.config, overrides)
    out = run_experiment(spec)
    print(out)
    return 0


def cmd_gradcheck(args):
    results = gradcheck.run_all(seed=args.seed, sizes=args.sizes, n=args.n)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_diagnose(args):
    try:
        summary = diagnose(args.checkpoint, args.data, args.out, n_bins=args.bins)
    except (ValueError, KeyError) as exc:
        raise ConfigError("diagnose", str(exc)) from exc
    for k, v in summary.items():
        print(f"{k}: {v}")
    return 0


def cmd_gen_data(args):
    if args.generator == "blobs":
        out = make_blobs(args.n, args.classes, args.dim, args.separation, seed=args.seed, n_test=args.n_test)
    else:
        out = make_rings(args.n, max(args.dim, 2), args.ring_noise, seed=args.seed, n_test=args.n_test)
    train, test = out if args.n_test else (out, None)
    write_csv(train, args.out, with_noise=False)
    if test is not None:
        if not args.test_out:
            raise ConfigError("test-out", "required when --n-test > 0")
        write_csv(test, args.test_out, with_noise=False)
    return 0


def cmd_inject_noise(args):
    ds = read_csv(args.data)
    try:
        noisy = inject(ds, args.type, args.rate, seed=args.seed, class_map=args.class_map)
    except ValueError as exc:
        raise ConfigError("noise", str(exc)) from exc
    write_csv(noisy, args.out, with_noise=True)
    print(f"realized noise rate: {noisy.noise_rate():.4f}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="dpc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one experiment into a run directory")
    t.add_argument("--config", required=True)
    t.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
    t.add_argument("--output", help="run directory (overrides output_dir)")
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("gradcheck", help="finite-difference checks of all analytic gradients")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sizes", type=_ints, default=(2, 5, 10), help="class counts, e.g. 2,5,10")
    g.add_argument("--n", type=int, default=1000, help="instances per loss suite")
    g.set_defaults(func=cmd_gradcheck)

    d = sub.add_parser("diagnose", help="histograms, reliability data and AUC for a checkpoint")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--data", required=True, help="dataset CSV")
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--bins", type=int, default=None, help="ECE bins (default: from checkpoint)")
    d.set_defaults(func=cmd_diagnose)

    gd = sub.add_parser("gen-data", help="write a synthetic dataset to CSV")
    gd.add_argument("--generator", choices=("blobs", "rings"), default="blobs")
    gd.add_argument("--n", type=int, default=8000)
    gd.add_argument("--n-test", type=int, default=0)
    gd.add_argument("--classes", type=int, default=4)
    gd.add_argument("--dim", type=int, default=20)
    gd.add_argument("--separation", type=float, default=3.0)
    gd.add_argument("--ring-noise", type=float, default=0.15)
    gd.add_argument("--seed", type=int, default=0)
    gd.add_argument("--out", required=True)
    gd.add_argument("--test-out")
    gd.set_defaults(func=cmd_gen_data)

    n = sub.add_parser("inject-noise", help="corrupt the labels of a dataset CSV")
    n.add_argument("--data", required=True)
    n.add_argument("--type", choices=("symmetric", "asymmetric"), default="symmetric")
    n.add_argument("--rate", type=float, required=True)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--class-map", type=_ints, default=None, help="asymmetric targets, e.g. 1,2,0")
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_inject_noise)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
