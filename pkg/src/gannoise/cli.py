"""Command line entry point: ``gannoise sweep|plot|dump|embedder``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import GanNoiseError

METRIC_CHOICES = ("fd", "jsd", "fid", "is_mean")


def _sweep(args):
    from .experiment import load_config
    from .harness import run_sweep

    path = run_sweep(
        load_config(args.config), args.out, parallelism=args.parallelism, force=args.force,
        strip_timing=args.strip_timing, checkpoints=args.checkpoints,
    )  # fmt: skip
    print(path)


def _plot(args):
    from .plotting import emit_plot_svg

    print(emit_plot_svg(args.results, args.metric, args.out))


def _dump(args):
    from .dump import dump_samples

    paths = dump_samples(args.checkpoint, args.dataset, args.n, args.out, seed=args.seed,
                         noise_dist=args.noise_dist, bins=args.bins)  # fmt: skip
    print(f"wrote {len(paths)} file(s) to {args.out}")


def _embedder(args):
    from .data import load_mnist, resolve_mnist_dir
    from .embedder import save_embedder, train_embedder

    mnist_dir = resolve_mnist_dir(args.mnist_dir)
    embedder = train_embedder(load_mnist(mnist_dir, "train"), load_mnist(mnist_dir, "test"),
                              seed=args.seed, epochs=args.epochs)  # fmt: skip
    save_embedder(embedder, args.out)
    print(f"test accuracy {embedder.test_accuracy:.4f}; saved {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gannoise", description="Noise-dimension sweeps for GAN training.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run every cell of a sweep config")
    p.add_argument("--config", required=True, help="JSON sweep file")
    p.add_argument("--out", required=True, help="output directory (results.csv goes here)")
    p.add_argument("--parallelism", type=int, default=1, metavar="N")
    p.add_argument("--force", action="store_true", help="overwrite an existing results.csv")
    p.add_argument("--strip-timing", action="store_true", help="leave wall_ms empty for byte comparisons")
    p.add_argument("--checkpoints", action="store_true", help="save final weights of every run")
    p.set_defaults(func=_sweep)

    p = sub.add_parser("plot", help="SVG of a metric against noise dimension")
    p.add_argument("--results", required=True)
    p.add_argument("--metric", required=True, choices=METRIC_CHOICES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_plot)

    p = sub.add_parser("dump", help="write samples from a generator checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, choices=("gaussian", "mnist"))
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-dist", default="standard_normal", choices=("standard_normal", "uniform_pm1"))
    p.add_argument("--bins", type=int, default=50)
    p.set_defaults(func=_dump)

    p = sub.add_parser("embedder", help="train and save the surrogate MNIST embedder")
    p.add_argument("--mnist-dir", default=None, help="defaults to $GANNOISE_MNIST_DIR")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=3)
    p.set_defaults(func=_embedder)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (GanNoiseError, FileExistsError, FileNotFoundError) as exc:
        print(f"gannoise: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
