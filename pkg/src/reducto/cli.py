"""Command-line driver.

Train::

    reducto --oaa 3 -d train.txt -f model.txt -p progressive.txt --passes 2

Test with a saved model::

    reducto -t -i model.txt -d test.txt -p predictions.txt

Run an acceptance experiment::

    reducto --experiment consistency
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .base import BaseConfig
from .core import ReductoError
from .driver import RunConfig, run_test, run_train
from .harness import EXPERIMENTS, HarnessConfig, run_experiment

log = logging.getLogger("reducto")

# sugar flag -> stack template
SUGAR = {
    "oaa": "oaa:{k}|base",
    "woa": "woa:{k}|base",
    "oaa_scores": "oaa_scores:{k}|base",
    "csoaa": "csoaa:{k}|base",
    "ecoc": "ecoc:{k}|base",
    "log_tree": "log_tree:{k}|base",
    "cb": "cb:{k}|csoaa:{k}|base",
    "search": "search:{k}|csoaa:{k}|base",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="reducto",
        description="Online learning reductions over a hashed linear learner.",
    )
    g = p.add_argument_group("model")
    g.add_argument("--stack", help='reduction stack, e.g. "cb:4|csoaa:4|base"')
    for name in SUGAR:
        g.add_argument(f"--{name}", type=int, metavar="K", help=f"shorthand for {SUGAR[name]}")
    g.add_argument("-b", "--bits", type=int, default=18, help="log2 of the feature table size")

    g = p.add_argument_group("learning")
    g.add_argument("-l", "--learning_rate", type=float, default=0.5)
    g.add_argument("--loss", choices=("squared", "logistic"), default="squared")
    g.add_argument("--adaptive", action="store_true", help="per-feature AdaGrad rates")
    g.add_argument("--normalized", action="store_true", help="scale-free per-feature updates")
    g.add_argument("--invariant", action="store_true", help="importance-invariant updates")
    g.add_argument("--power_t", type=float, default=0.5)
    g.add_argument("--no_bias", action="store_true", help="drop the constant feature")
    g.add_argument("--passes", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)

    g = p.add_argument_group("io")
    g.add_argument("-d", "--data", help="input file (default: stdin)")
    g.add_argument("-f", "--final_regressor", dest="model_out", help="write the model here")
    g.add_argument("-i", "--initial_regressor", dest="model_in", help="load a model")
    g.add_argument("-t", "--testonly", dest="test_only", action="store_true",
                   help="predict only, no learning")
    g.add_argument("-p", "--predictions", help="write one prediction per line")
    g.add_argument("--scores", action="store_true",
                   help="append per-class scores to multiclass predictions")
    g.add_argument("--affixes", action="store_true",
                   help="add prefix/suffix features for each token")
    g.add_argument("--quiet", action="store_true", help="no progress output")

    g = p.add_argument_group("experiments")
    g.add_argument("--experiment", choices=sorted(EXPERIMENTS), help="run an acceptance experiment")
    g.add_argument("--delta", type=float, default=0.05, help="noise level for 'consistency'")
    g.add_argument("-n", type=int, help="sample size override")
    g.add_argument("-k", type=int, help="class count override")
    g.add_argument("--report", help="write the experiment report as JSON")
    return p


def stack_from_args(args) -> Optional[str]:
    chosen = [(name, getattr(args, name)) for name in SUGAR if getattr(args, name) is not None]
    if args.stack and chosen:
        raise ReductoError("give either --stack or one shorthand flag, not both")
    if len(chosen) > 1:
        raise ReductoError(f"conflicting shorthand flags: {', '.join('--' + n for n, _ in chosen)}")
    if chosen:
        name, k = chosen[0]
        return SUGAR[name].format(k=k)
    return args.stack


def config_from_args(args) -> RunConfig:
    base = BaseConfig(
        learning_rate=args.learning_rate, loss=args.loss, adaptive=args.adaptive,
        normalized=args.normalized, invariant=args.invariant, power_t=args.power_t,
        bias=not args.no_bias,
    )
    return RunConfig(
        stack=stack_from_args(args), bits=args.bits, base=base, passes=args.passes,
        seed=args.seed, test_only=args.test_only, data=args.data, model_in=args.model_in,
        model_out=args.model_out, predictions=args.predictions, scores=args.scores,
        affixes=args.affixes,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s", stream=sys.stderr,
    )
    try:
        if args.experiment:
            report = run_experiment(HarnessConfig(
                args.experiment, delta=args.delta, n=args.n, k=args.k,
                report=args.report, seed=args.seed,
            ))
            print("\n".join(report.lines()))
            return 0 if report.passed else 1
        config = config_from_args(args)
        summary = run_test(config) if config.test_only else run_train(config)
    except (ReductoError, OSError, ValueError) as exc:
        print(f"reducto: error: {exc}", file=sys.stderr)
        return 2
    log.info("finished: %d examples, %d passes, average loss %.6f",
             summary.examples, summary.passes, summary.average_loss)
    return 0


if __name__ == "__main__":
    sys.exit(main())
