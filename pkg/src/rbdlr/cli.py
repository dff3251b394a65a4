"""Command-line front end: ``rbdlr {synth,noise,fit,features,classify,cluster}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import evaluation, fileio
from .core import Dataset, Hyperparams, InvalidInputError, Mode, SolverDivergenceError
from .solver import fit
from .synth import SyntheticSpec, add_gaussian_noise, generate_subspace_data

EXIT_INVALID = 2
EXIT_PARSE = 3
EXIT_SHAPE = 4
EXIT_DIVERGED = 5
EXIT_NUMERICAL = 6
EXIT_IO = 7


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(x_path, labels_path=None) -> Dataset:
    X = fileio.read_matrix(x_path)
    labels = fileio.read_labels(labels_path) if labels_path else None
    if labels is not None and labels.shape[0] != X.shape[1]:
        raise InvalidInputError(
            f"shape mismatch: {labels_path} has {labels.shape[0]} labels for {X.shape[1]} samples"
        )
    return Dataset(X, labels)


def cmd_synth(args):
    spec = SyntheticSpec(
        num_subspaces=args.num_subspaces,
        ambient_dim=args.ambient_dim,
        basis_dim=args.basis_dim,
        samples_per_subspace=args.samples_per_subspace,
        seed=args.seed,
    )
    data = generate_subspace_data(spec)
    out = _out_dir(args.output)
    fileio.write_matrix(out / "X.csv", data.X)
    fileio.write_labels(out / "labels.txt", data.labels)


def cmd_noise(args):
    X = fileio.read_matrix(args.input)
    columns = None
    if args.columns:
        columns = [int(c) for c in args.columns.split(",")]
        if min(columns) < 0 or max(columns) >= X.shape[1]:
            raise InvalidInputError(f"shape mismatch: column index out of range for {X.shape[1]} columns")
    fileio.write_matrix(args.output, add_gaussian_noise(X, args.variance, args.seed, columns))


def _hyperparams(args) -> Hyperparams:
    mode = Mode(args.mode)
    alpha, beta = args.alpha, args.beta
    if mode is Mode.FLLRR:
        alpha, beta = 0.0, 0.0
    return Hyperparams(
        alpha=alpha, beta=beta, gamma=args.gamma, k=args.k, mu0=args.mu0,
        mu_max=args.mu_max, eta=args.eta, eps=args.eps, max_iter=args.max_iter, mode=mode,
    )


def cmd_fit(args):
    hp = _hyperparams(args)
    data = _load_dataset(args.data, args.labels)
    k = hp.resolve_k(data) if hp.mode is Mode.RBDLR else hp.k
    result = fit(data, hp, threads=args.threads)
    hp_record = asdict(hp)
    hp_record["mode"] = hp.mode.value
    hp_record["k"] = k
    extra = {
        "hyperparameters": hp_record,
        "seed": args.seed,
        "threads": args.threads,
        "data_shape": list(data.X.shape),
    }
    fileio.save_model(args.output, result, extra)


def cmd_features(args):
    model = fileio.load_model(args.model)
    X = fileio.read_matrix(args.data)
    if X.shape[0] != model.P.shape[0]:
        raise InvalidInputError(
            f"shape mismatch: data has {X.shape[0]} features, model expects {model.P.shape[0]}"
        )
    fileio.write_matrix(args.output, evaluation.salient_features(model.P, X))


def cmd_classify(args):
    model = fileio.load_model(args.model)
    train = _load_dataset(args.train, args.train_labels)
    test = _load_dataset(args.test, args.test_labels)
    for name, d in (("train", train), ("test", test)):
        if d.X.shape[0] != model.P.shape[0]:
            raise InvalidInputError(
                f"shape mismatch: {name} data has {d.X.shape[0]} features, model expects {model.P.shape[0]}"
            )
    pred = evaluation.knn1_classify(
        evaluation.salient_features(model.P, train.X),
        train.labels,
        evaluation.salient_features(model.P, test.X),
    )
    out = _out_dir(args.output)
    fileio.write_labels(out / "predictions.txt", pred)
    metrics = {"n_train": int(train.n_samples), "n_test": int(test.n_samples)}
    if test.labels is not None:
        metrics["accuracy"] = float(np.mean(pred == test.labels))
    fileio.write_json(out / "metrics.json", metrics)


def cmd_cluster(args):
    model = fileio.load_model(args.model)
    data = _load_dataset(args.data, args.labels)
    feats = evaluation.clustering_input(model, data.X, args.input)
    K = args.K if args.K is not None else data.n_classes
    if K is None:
        raise InvalidInputError("--K is required when no labels are given")
    assign = evaluation.kmeans_cosine(feats, K, restarts=args.restarts, seed=args.seed)
    out = _out_dir(args.output)
    fileio.write_labels(out / "assignments.txt", assign)
    metrics = {"K": int(K), "restarts": args.restarts, "seed": args.seed, "input": args.input}
    if data.labels is not None:
        metrics["accuracy"] = evaluation.clustering_accuracy(assign, data.labels)
        metrics["f_score"] = evaluation.pairwise_f_score(assign, data.labels)
    fileio.write_json(out / "metrics.json", metrics)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbdlr",
        description="Block-diagonal latent representation: fit, features and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic union-of-subspaces benchmark")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-subspaces", type=int, default=10)
    p.add_argument("--ambient-dim", type=int, default=200)
    p.add_argument("--basis-dim", type=int, default=10)
    p.add_argument("--samples-per-subspace", type=int, default=9)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("noise", help="add i.i.d. Gaussian noise to a matrix")
    p.add_argument("input")
    p.add_argument("--variance", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--columns", help="comma-separated column indices to corrupt (default: all)")
    p.add_argument("-o", "--output", required=True, help="output CSV")
    p.set_defaults(func=cmd_noise)

    defaults = Hyperparams()
    p = sub.add_parser("fit", help="fit the model and write the model directory")
    p.add_argument("data", help="matrix CSV, samples as columns")
    p.add_argument("--labels", help="labels file; supplies k when --k is omitted")
    p.add_argument("--alpha", type=float, default=defaults.alpha)
    p.add_argument("--beta", type=float, default=defaults.beta)
    p.add_argument("--gamma", type=float, default=defaults.gamma)
    p.add_argument("--k", type=int)
    p.add_argument("--mu0", type=float, default=defaults.mu0)
    p.add_argument("--mu-max", type=float, default=defaults.mu_max)
    p.add_argument("--eta", type=float, default=defaults.eta)
    p.add_argument("--eps", type=float, default=defaults.eps)
    p.add_argument("--max-iter", type=int, default=defaults.max_iter)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.RBDLR.value)
    p.add_argument("--seed", type=int, default=0, help="recorded in the report")
    p.add_argument("-o", "--output", required=True, help="model directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("features", help="salient features P X of new data")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("-o", "--output", required=True, help="output CSV")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("classify", help="1-NN classification on salient features")
    p.add_argument("model")
    p.add_argument("--train", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--test-labels")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("cluster", help="cosine K-means on recovered data")
    p.add_argument("model")
    p.add_argument("--data", required=True, help="the matrix the model was fitted on")
    p.add_argument("--labels")
    p.add_argument("--K", type=int)
    p.add_argument("--restarts", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", choices=evaluation.CLUSTER_INPUTS, default="uz")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_cluster)

    for p in sub.choices.values():
        p.add_argument("--threads", type=int, default=1,
                       help="BLAS thread cap; 1 gives byte-identical outputs")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be positive")
    from threadpoolctl import threadpool_limits

    try:
        with threadpool_limits(limits=args.threads):
            args.func(args)
    except fileio.ParseError as exc:
        print(f"rbdlr: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverDivergenceError as exc:
        print(f"rbdlr: solver divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except InvalidInputError as exc:
        msg = str(exc)
        code = EXIT_SHAPE if msg.startswith("shape mismatch") else EXIT_INVALID
        label = "" if code == EXIT_SHAPE else "invalid input: "
        print(f"rbdlr: {label}{msg}", file=sys.stderr)
        return code
    except np.linalg.LinAlgError as exc:
        print(f"rbdlr: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"rbdlr: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
