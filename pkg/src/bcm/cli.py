"""Command-line surface: generate, fit, explain, eval, sweep, oracle-check.

Exit codes: 0 success, 1 usage or configuration problem, 2 data problem,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import evaluate, explain, generate, io, oracle
from .core import Hyperparams, rebuild_counts
from .errors import ConfigError, DataError, NumericalError
from .gibbs import ChainConfig, run_chain

log = logging.getLogger("bcm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(self._usage_exit(message))

    def _usage_exit(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return 1


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--verbose", action="store_true", help="chatty logging")


def _add_hyper_flags(parser):
    parser.add_argument("--clusters", type=int, required=True, help="number of clusters S")
    parser.add_argument("--alpha", type=float, default=1.0,
                        help="total Dirichlet mass over cluster weights")
    parser.add_argument("--q", type=float, default=0.5, help="subspace Bernoulli rate")
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0,
                        help="baseline Dirichlet pseudo-count")
    parser.add_argument("--c", type=float, default=50.0, help="prototype copy strength")
    parser.add_argument("--similarity", choices=["exact", "threshold"], default="exact")
    parser.add_argument("--epsilon", type=float, default=0.0,
                        help="squared-distance threshold for --similarity threshold")


def _hyper_from_args(args) -> Hyperparams:
    return Hyperparams(
        n_clusters=args.clusters,
        alpha=args.alpha,
        subspace_rate=args.q,
        pseudocount=args.lam,
        copy_strength=args.c,
        similarity=args.similarity,
        epsilon=args.epsilon,
    )


def _read_data(args) -> "io.Dataset":
    return io.read_dataset_csv(
        args.data,
        vocab_path=getattr(args, "vocab", None),
        label_column=getattr(args, "label_column", "label"),
        id_column=getattr(args, "id_column", "id"),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bcm",
                     description="prototype/subspace clustering of discrete data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[], help="write a synthetic dataset")
    p.add_argument("--preset", choices=["smiley"], default="smiley")
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.add_argument("--truth", help="planted-truth JSON path")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="run the sampler on a dataset")
    p.add_argument("data", help="dataset CSV")
    _add_hyper_flags(p)
    p.add_argument("--iters", type=int, default=1000, help="number of sweeps")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--vocab", help="vocabulary sidecar JSON")
    p.add_argument("--label-column", default="label")
    p.add_argument("--id-column", default="id")
    p.add_argument("--proto-update", choices=["sample", "argmax"], default="sample")
    p.add_argument("--log-every", type=int, default=10)
    p.add_argument("--engine", choices=["fast", "reference"], default="fast")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("explain", help="report prototypes and subspaces")
    p.add_argument("model", help="model JSON")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--format", choices=["markdown", "json"], default="markdown")
    p.add_argument("--vocab", help="vocabulary sidecar JSON")
    p.add_argument("--out", help="write here instead of stdout")
    _add_common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("eval", help="score a fitted model against labels")
    p.add_argument("model", help="model JSON")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--labels", default="label", help="label column name")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--vocab", help="vocabulary sidecar JSON")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="refit across a hyperparameter grid")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--grid", required=True,
                   help='JSON file mapping "q"/"lambda"/"c" to value lists')
    _add_hyper_flags(p)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--out", required=True, help="sweep CSV path")
    p.add_argument("--vocab", help="vocabulary sidecar JSON")
    p.add_argument("--label-column", default="label")
    p.add_argument("--id-column", default="id")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle-check",
                       help="compare conditionals against brute-force oracles")
    p.add_argument("--states", type=int, default=200)
    _add_common(p)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def cmd_generate(args) -> int:
    dataset, truth = generate.make_smiley_dataset(args.seed)
    io.write_dataset_csv(args.out, dataset)
    log.info("wrote %s (+%s)", args.out, io.vocab_sidecar_path(args.out))
    if args.truth:
        io.save_truth_json(args.truth, truth)
        log.info("wrote %s", args.truth)
    return 0


def cmd_fit(args) -> int:
    dataset = _read_data(args)
    hyper = _hyper_from_args(args)
    config = ChainConfig(
        iterations=args.iters,
        seed=args.seed,
        log_every=args.log_every,
        prototype_update=args.proto_update,
        engine=args.engine,
    )
    state, trace = run_chain(dataset, hyper, config)
    score = float(trace.log_scores[-1])
    if not math.isfinite(score):
        raise NumericalError(f"final collapsed log score is {score}")
    io.save_model(args.out, state, hyper, dataset, meta={
        "log_score": score,
        "iterations": args.iters,
        "seed": args.seed,
        "prototype_update": args.proto_update,
    })
    io.save_trace_csv(io.trace_csv_path(args.out), trace)
    log.info("final log score %.3f; wrote %s", score, args.out)
    return 0


def cmd_explain(args) -> int:
    state, hyper, payload = io.load_model(args.model)
    dataset = _read_data(args)
    io.check_model_dataset(payload, dataset)
    counts = rebuild_counts(dataset, state)
    expl = explain.extract_explanation(state, counts, dataset, hyper)
    if args.format == "json":
        text = json.dumps(explain.explanation_to_dict(expl), indent=1)
    else:
        text = explain.explanation_to_markdown(expl)
    if args.out:
        io._atomic_write_text(args.out, text)
    else:
        print(text)
    return 0


def cmd_eval(args) -> int:
    state, hyper, payload = io.load_model(args.model)
    args.label_column = args.labels
    args.id_column = "id"
    dataset = _read_data(args)
    io.check_model_dataset(payload, dataset)
    report = evaluate.evaluate_model(state, dataset, hyper,
                                     folds=args.folds, seed=args.seed)
    text = json.dumps(
        {
            "unsupervised_accuracy": report.unsupervised_accuracy,
            "best_permutation_accuracy": report.best_permutation_accuracy,
            "classifier_accuracy_mean": report.classifier_accuracy_mean,
            "classifier_accuracy_std": report.classifier_accuracy_std,
            "purity": [None if np.isnan(v) else v for v in report.purity],
            "classes": report.classes,
            "confusion": report.confusion.tolist(),
        },
        indent=1,
    )
    if args.out:
        io._atomic_write_text(args.out, text)
    else:
        print(text)
    return 0


def cmd_sweep(args) -> int:
    dataset = _read_data(args)
    hyper = _hyper_from_args(args)
    try:
        with open(args.grid, "r", encoding="utf-8") as handle:
            grid = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read grid file {args.grid}: {exc}") from exc
    rows = evaluate.sensitivity_sweep(dataset, hyper, grid,
                                      iterations=args.iters, seed=args.seed)
    io.save_sweep_csv(args.out, rows)
    log.info("wrote %d rows to %s", len(rows), args.out)
    return 0


def cmd_oracle_check(args) -> int:
    report = oracle.run_oracle_check(n_states=args.states, seed=args.seed)
    print(f"states checked:              {report.n_states}")
    print(f"max assignment deviation:    {report.max_rel_assignment:.3e} (relative)")
    print(f"max prototype deviation:     {report.max_rel_prototype:.3e} (relative)")
    print(f"max subspace deviation:      {report.max_abs_subspace:.3e} (absolute)")
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 3


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"bcm: configuration error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"bcm: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"bcm: numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"bcm: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
