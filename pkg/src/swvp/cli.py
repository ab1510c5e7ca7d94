"""Command-line entry point: generate, train, analyze, experiment, report."""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .analysis import compute_margins, compute_mistake_bound, find_separator
from .core import JJPolicy
from .features import FeatureIndex, SequenceExample
from .gamma import MODEL_TOKENS, GammaScheme
from .harness import (
    ExperimentConfig,
    accuracy,
    read_report,
    render_table,
    run_experiment,
)
from .inference import viterbi_argmax
from .synth import (
    get_setup,
    read_dataset,
    sample_dataset,
    sample_model,
    split_dataset,
    write_dataset,
    write_params,
)
from .trainers import TrainConfig, train_csp, train_swvp


def _beta_grid(text):
    try:
        grid = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad beta grid {text!r}") from None
    if not grid:
        raise argparse.ArgumentTypeError("empty beta grid")
    return grid


def _model(text):
    token = text.upper()
    if token not in MODEL_TOKENS:
        raise argparse.ArgumentTypeError(f"unknown model {text!r}; choose from {', '.join(MODEL_TOKENS)}")
    return token


def _add_common(p, setup=True):
    if setup:
        p.add_argument("--setup", type=int, choices=(1, 2, 3), default=1)
        p.add_argument("--scale", choices=("paper", "desk"), default="desk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path")


def _add_training(p):
    p.add_argument("--model", type=_model, default="CSP")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--policy", choices=[v.value for v in JJPolicy], default="single")
    p.add_argument("--shuffle", action="store_true")
    p.add_argument("--average", action="store_true")
    p.add_argument("--enforce-condition2", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="swvp", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample an HMM and write train/dev/test files")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one model and print its summary")
    _add_common(p)
    _add_training(p)
    p.add_argument("--data", help="training file (x1 .. xL<TAB>y1 .. yL); default: sample from --setup")
    p.add_argument("--eval", help="evaluation file; default: the sampled test split")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="separability, radius and mistake-bound report")
    _add_common(p, setup=False)
    p.add_argument("--data", help="dataset file; default: a small teacher-labelled sample")
    p.add_argument("--n-obs", type=int, default=4)
    p.add_argument("--n-labels", type=int, default=3)
    p.add_argument("--items", type=int, default=20)
    p.add_argument("--length", type=int, default=4)
    p.add_argument("--policy", choices=[v.value for v in JJPolicy], default="single")
    p.add_argument("--model", type=_model, default="A-WM", help="SWVP variant run for the first-pass count")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=None, help="witness margin; default: the certified margin")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("experiment", help="run the replicated beta-selection protocol")
    _add_common(p)
    p.add_argument("--config", help="JSON config; command-line flags override its values")
    p.add_argument("--replicas", type=int)
    p.add_argument("--models", type=lambda s: tuple(_model(t) for t in s.split(",")))
    p.add_argument("--beta-grid", type=_beta_grid)
    p.add_argument("--epochs", type=int)
    p.add_argument("--shuffle", action="store_true", default=None)
    p.add_argument("--average", action="store_true", default=None)
    p.add_argument("--enforce-condition2", action="store_true", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="re-render a report file as a table")
    p.add_argument("path")
    p.set_defaults(func=cmd_report)
    return ap


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _sample_splits(args):
    spec = get_setup(args.setup, args.scale)
    params = sample_model(spec, args.seed)
    data = sample_dataset(params, spec.n_items, spec.length, args.seed + 1)
    return spec, params, split_dataset(data, spec.splits)


def cmd_generate(args):
    spec, params, (train, dev, test) = _sample_splits(args)
    out = args.out or f"data_setup{args.setup}_seed{args.seed}"
    os.makedirs(out, exist_ok=True)
    for name, part in (("train", train), ("dev", dev), ("test", test)):
        write_dataset(os.path.join(out, f"{name}.txt"), part)
    write_params(os.path.join(out, "params.json"), params)
    print(f"wrote {len(train)}/{len(dev)}/{len(test)} sequences of length {spec.length} to {out}")
    return 0


def _index_for(*datasets):
    n_obs = max(int(ex.x.max()) for d in datasets for ex in d)
    n_labels = max(int(ex.y.max()) for d in datasets for ex in d)
    return FeatureIndex(n_obs, n_labels)


def cmd_train(args):
    if args.data:
        train = read_dataset(args.data)
        evals = read_dataset(args.eval) if args.eval else None
        index = _index_for(train, *([evals] if evals else []))
    else:
        spec, _, (train, _, test) = _sample_splits(args)
        evals = read_dataset(args.eval) if args.eval else test
        index = FeatureIndex(spec.n_obs, spec.n_labels)
    scheme = GammaScheme.parse(args.model, args.beta, args.enforce_condition2)
    config = TrainConfig(
        max_epochs=args.epochs,
        scheme=scheme,
        jj_policy=JJPolicy.FULL if scheme.is_csp else args.policy,
        averaging=args.average,
        seed=args.seed,
        shuffle=args.shuffle,
    )
    res = train_csp(train, index, config) if scheme.is_csp else train_swvp(train, index, config)
    w = res.weights(args.average)
    lines = [f"model={scheme.token}", f"beta={scheme.beta!r}" if not scheme.is_csp else "beta=-"]
    lines.append(res.summary())
    lines.append(f"train_accuracy={accuracy(w, train, index)!r}")
    if evals:
        lines.append(f"eval_accuracy={accuracy(w, evals, index)!r}")
    _emit("\n".join(lines), args.out)
    return 0


def _teacher_data(args, index):
    rng = np.random.default_rng(args.seed)
    teacher = rng.normal(size=index.size)
    data = []
    for _ in range(args.items):
        x = rng.integers(1, index.n_obs + 1, size=args.length)
        data.append(SequenceExample(x, viterbi_argmax(x, teacher, index)))
    return data


def cmd_analyze(args):
    if args.data:
        data = read_dataset(args.data)
        index = _index_for(data)
    else:
        index = FeatureIndex(args.n_obs, args.n_labels)
        data = _teacher_data(args, index)
    u = find_separator(data, index)
    lines = []
    if u is None:
        # not certified separable: fall back to a random witness direction
        rng = np.random.default_rng(args.seed)
        u = rng.normal(size=index.size)
        lines.append("witness=random")
    else:
        lines.append("witness=separator")
    rep = compute_margins(data, u, args.policy, index)
    lines.append(rep.to_lines())
    delta = args.delta if args.delta is not None else (rep.delta if rep.separable else 0.1)
    mb = compute_mistake_bound(
        data, rep.u, delta, args.policy, index, GammaScheme.parse(args.model, args.beta), stats=rep.per_example
    )
    lines.extend(f"bound.{line}" for line in mb.to_lines().splitlines())
    _emit("\n".join(lines), args.out)
    return 0


def cmd_experiment(args):
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    else:
        base = {"setup": args.setup, "scale": args.scale, "seed": args.seed}
    overrides = {
        "replicas": args.replicas,
        "models": args.models,
        "beta_grid": args.beta_grid,
        "epochs": args.epochs,
        "shuffle": args.shuffle,
        "average": args.average,
        "enforce_condition2": args.enforce_condition2,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    config = ExperimentConfig.from_dict(base)

    def progress(r, sel):
        logging.getLogger("swvp").info("replica %d done: best=%s", r, sel["best_swvp"])

    report = run_experiment(config, progress=progress)
    out = args.out or "report.jsonl"
    report.write(out)
    print(report.table())
    print(f"report written to {out}")
    return 0


def cmd_report(args):
    print(render_table(read_report(args.path)))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
