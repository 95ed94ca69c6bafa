"""Command-line pipeline: ingest, synth, represent, train, eval, dump.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 convergence
failure.
"""

import argparse
import json
import os
import sys

from . import __version__
from .dataio import (bind_model, dump_matrix, ingest,
                     load_representation, model_from_json, model_to_json,
                     resolve_split, save_representations, write_jsonl)
from .errors import (ConfigError, NotConverged, NotFound, SicerepError)
from .experiment import (ExperimentConfig, build_representation,
                         render_report, render_timings, run_experiment,
                         slice_level)
from .svm import predict_batch
from .synth import SyntheticSpec, synth_generate


def _add_pipeline_args(p):
    p.add_argument("--representation", default="hierarchy",
                   choices=("cov", "invcov", "sice", "hierarchy"))
    p.add_argument("--integrator", default="beta",
                   choices=("single", "beta", "m", "mkl", "emk"))
    p.add_argument("--levels", type=int, default=10)
    p.add_argument("--ratio", type=float, default=0.01)
    p.add_argument("--eps", type=float, default=1e-7)
    p.add_argument("--gamma", default="auto",
                   help="kernel bandwidth, or 'auto' for the median heuristic")
    p.add_argument("--c-grid", default="0.1,1,10,100",
                   help="comma-separated SVM regularizer grid")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--glasso-tol", type=float, default=1e-6)
    p.add_argument("--glasso-max-iter", type=int, default=1000)


def _config_from_args(args):
    gamma = args.gamma if args.gamma == "auto" else float(args.gamma)
    c_grid = tuple(float(c) for c in args.c_grid.split(","))
    return ExperimentConfig(
        representation=args.representation, integrator=args.integrator,
        levels=args.levels, ratio=args.ratio, eps=args.eps, gamma=gamma,
        c_grid=c_grid, folds=args.folds, seed=args.seed,
        glasso_tol=args.glasso_tol, glasso_max_iter=args.glasso_max_iter)


def cmd_ingest(args):
    dataset = ingest(args.manifest)
    labels = sorted({s.label for s in dataset.sequences})
    dims = sorted({s.dim for s in dataset.sequences})
    lengths = [s.length for s in dataset.sequences]
    lines = [
        f"samples: {len(dataset.sequences)}",
        f"feature mode: {dataset.manifest.feature_mode}",
        f"classes: {', '.join(labels)}",
        f"feature dim: {', '.join(str(d) for d in dims)}",
        f"frames per sample: {min(lengths)}..{max(lengths)}",
    ]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def cmd_synth(args):
    spec = SyntheticSpec(
        dim=args.dim, m_range=(args.m_min, args.m_max),
        samples_per_class=args.per_class,
        structures=tuple(args.structures.split(",")),
        noise=args.noise, seed=args.seed)
    sequences, truths = synth_generate(spec)
    os.makedirs(args.out, exist_ok=True)
    data_path = os.path.join(args.out, "data.jsonl")
    write_jsonl(data_path, sequences)
    # first train-per-class ids train, the rest test, per class
    train, test = [], []
    for label in sorted(truths):
        ids = sorted(s.sample_id for s in sequences if s.label == label)
        train.extend(ids[:args.train_per_class])
        test.extend(ids[args.train_per_class:])
    manifest = {
        "feature_mode": "raw-vectors",
        "sequences": "data.jsonl",
        "split": {"train": train, "test": test},
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for label in sorted(truths):
        dump_matrix(truths[label], os.path.join(args.out, f"truth_{label}.csv"))
    sys.stdout.write(f"wrote {len(sequences)} samples to {args.out}\n")
    return 0


def cmd_represent(args):
    dataset = ingest(args.manifest)
    config = _config_from_args(args)
    hierarchies = [build_representation(s, config) for s in dataset.sequences]
    save_representations(args.out, hierarchies)
    sys.stdout.write(
        f"wrote {len(hierarchies)} representations "
        f"(depth {hierarchies[0].depth}) to {args.out}\n")
    return 0


def cmd_train(args):
    dataset = ingest(args.manifest)
    config = _config_from_args(args)
    report, model = run_experiment(config, dataset)
    pipeline = {
        "representation": config.representation,
        "integrator": config.integrator,
        "levels": config.levels, "ratio": config.ratio, "eps": config.eps,
        "glasso_tol": config.glasso_tol,
        "selected_level": report.selected_level,
        "seed": config.seed,
    }
    with open(args.model, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model, pipeline))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(render_report(report))
    if args.timings:
        with open(args.timings, "w", encoding="utf-8") as fh:
            fh.write(render_timings(report))
    sys.stdout.write(f"test accuracy: {report.accuracy:.4f}\n")
    return 0


def cmd_eval(args):
    dataset = ingest(args.manifest)
    with open(args.model, "r", encoding="utf-8") as fh:
        model, pipeline = model_from_json(fh.read())
    config = ExperimentConfig(
        representation=pipeline.get("representation", "hierarchy"),
        integrator=pipeline.get("integrator", model.kind),
        levels=pipeline.get("levels", model.depth),
        ratio=pipeline.get("ratio", 0.01),
        eps=pipeline.get("eps", 1e-7),
        glasso_tol=pipeline.get("glasso_tol", 1e-6),
        seed=pipeline.get("seed", 0))
    by_id = dataset.by_id()
    selected_level = pipeline.get("selected_level")

    def represent(sid):
        h = build_representation(by_id[sid], config)
        return slice_level(h, selected_level) if selected_level is not None else h

    missing = [sid for sid in model.sample_ids if sid not in by_id]
    if missing:
        raise NotFound(f"manifest lacks training samples {missing[:3]}")
    model = bind_model(model, {sid: represent(sid) for sid in model.sample_ids})

    _, test_ids = resolve_split(dataset, None)
    test_ids = [t for t in test_ids if t not in set(model.sample_ids)]
    if not test_ids:
        raise ConfigError("no test samples outside the model's training set")
    test_h = [represent(sid) for sid in test_ids]
    preds = [r[0] for r in predict_batch(model, test_h)]
    truths = [by_id[sid].label for sid in test_ids]
    hits = sum(1 for t, p in zip(truths, preds) if t == p)
    lines = [f"test samples: {len(test_ids)}",
             f"accuracy: {hits / len(test_ids):.6f}"]
    for sid, p in zip(test_ids, preds):
        lines.append(f"{sid}: {p}")
    text = "\n".join(lines) + "\n"
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(lines[1] + "\n")
    return 0


def cmd_dump(args):
    if args.store:
        values = load_representation(args.store, args.sample, args.level)
        dump_matrix(values, args.out)
    elif args.model:
        with open(args.model, "r", encoding="utf-8") as fh:
            model, _ = model_from_json(fh.read())
        if model.weights is None:
            raise NotFound("model has no learned weights to dump")
        w = model.weights.as_array()
        dump_matrix(w.reshape(1, -1) if w.ndim == 1 else w, args.out)
    else:
        raise ConfigError("dump needs --store or --model")
    sys.stdout.write(f"wrote {args.out}\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sicerep",
        description="Sparse inverse covariance representations and "
                    "SPD-kernel sequence classification")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--summary", help="write the summary to this file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--m-min", type=int, default=12)
    p.add_argument("--m-max", type=int, default=18)
    p.add_argument("--per-class", type=int, default=60)
    p.add_argument("--train-per-class", type=int, default=30)
    p.add_argument("--structures", default="chain,grid,sparse:0.15")
    p.add_argument("--noise", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("represent", help="compute and store representations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_represent)

    p = sub.add_parser("train", help="cross-validate and train a classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--report")
    p.add_argument("--timings")
    p.add_argument("--seed", type=int, required=True)
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on a test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dump", help="dump a matrix (representation or weights) as CSV")
    p.add_argument("--store", help="representations npz from 'represent'")
    p.add_argument("--sample", help="sample id within the store")
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--model", help="model json; dumps the learned weights")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return 2
    except NotConverged as exc:
        sys.stderr.write(f"convergence failure: {exc}\n")
        return 4
    except SicerepError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return 3
    except OSError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
