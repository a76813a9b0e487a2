"""Command-line entry point: ``cfrobust <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import BlobsSpec, load_csv, make_blobs
from .experiment import (
    ExperimentConfig,
    FittedPipeline,
    default_seed,
    dumps,
    fit_pipeline,
    run_dimensionality_study,
    run_experiment,
    tail_check,
    theory_check,
    write_outputs,
)

log = logging.getLogger("cfrobust")


def _ints(text: str) -> list:
    return [int(t) for t in text.split(",") if t.strip()]


def _floats(text: str) -> list:
    return [float(t) for t in text.split(",") if t.strip()]


def _load_config(args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        base = Path(args.config).parent
        if doc.get("dataset") and not Path(doc["dataset"]).is_absolute():
            doc["dataset"] = str(base / doc["dataset"])
    else:
        doc = {}
    if getattr(args, "dataset", None):
        doc["dataset"] = args.dataset
    if getattr(args, "model", None):
        doc["model"] = args.model
    if getattr(args, "pca_dims", None) is not None:
        doc["pca_dims"] = args.pca_dims
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.metric:
        doc["metric"] = args.metric
    if args.mode:
        doc["modes"] = [args.mode]
    if args.threshold_quantile is not None:
        doc["threshold_quantile"] = args.threshold_quantile
    if args.out:
        doc["output"] = args.out
    if doc.get("dataset") is None and doc.get("blobs") is None:
        raise SystemExit("error: a dataset is required (--config or --dataset)")
    return ExperimentConfig.from_dict(doc)


def _seed(args) -> int:
    return default_seed() if args.seed is None else int(args.seed)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    data = load_csv(cfg.dataset) if cfg.dataset else make_blobs(cfg.blobs)
    fitted = fit_pipeline(data, cfg, seed=cfg.seed, with_density=True)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "model.json"
    path.write_text(dumps(fitted.to_dict()) + "\n")
    print(path)
    return 0


def cmd_explain(args) -> int:
    with open(args.model_file) as fh:
        fitted = FittedPipeline.from_dict(json.load(fh))
    if args.x is not None:
        x = np.array(_floats(args.x))
        label = None
    else:
        data = load_csv(args.dataset)
        x, label = data.X[args.index], int(data.y[args.index])
    pred = int(fitted.model.predict(x))
    target = args.target
    if target is None:
        classes = list(fitted.model.classes)
        if len(classes) != 2:
            raise SystemExit("error: --target is required for multiclass models")
        target = classes[1 - classes.index(pred)]
    gen = fitted.generator(args.mode or "closest", args.metric or "l2sq")
    res = gen(x, target)
    doc = {"schema": 1, "prediction": pred, "label": label, "counterfactual": res.to_dict()}
    text = json.dumps(doc, sort_keys=True, indent=1)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "explanation.json").write_text(text + "\n")
    print(text)
    return 0 if res.feasible else 2


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    doc = run_experiment(cfg)
    print(json.dumps(doc["summary"], sort_keys=True, indent=1))
    return 0


def cmd_blobs(args) -> int:
    data = make_blobs(BlobsSpec(args.d, args.n_per_class, args.separation, _seed(args)))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"blobs_d{args.d}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*data.feature_names, "label"])
        for row, label in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])
    print(path)
    return 0


def cmd_dim_study(args) -> int:
    doc = run_dimensionality_study(
        _ints(args.d_list),
        tuple(args.models.split(",")),
        seed=_seed(args),
        n_per_class=args.n_per_class,
        separation=args.separation,
        metric=args.metric or "l1",
        max_test_per_fold=args.max_test_per_fold,
        output=args.out,
    )
    print(json.dumps({"spearman": doc["spearman"], "curves": doc["curves"]}, sort_keys=True, indent=1))
    return 0


def cmd_theory_check(args) -> int:
    doc = theory_check(
        _ints(args.d_list),
        eps_list=_floats(args.eps_list),
        draws=args.draws,
        seed=_seed(args),
        bound_trials=args.bound_trials,
    )
    doc["tail"] = tail_check(seed=_seed(args), draws=args.tail_draws)
    ok = doc["pass"] and not any(r["violated"] for r in doc["tail"])
    doc["pass"] = ok
    for c in doc["cases"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['case']:<20} d={c['d']:<3} expected={c['expected']:.4f} mc={c['mc_mean']:.4f} z={c['z']:+.2f}")
    b = doc["bounds"]
    print(f"bound violations: general={b['general_violations']} linear={b['linear_violations']} over {b['trials']} trials")
    print(f"tail violations: {sum(r['violated'] for r in doc['tail'])}")
    if args.out:
        write_outputs(doc, args.out, "theory_check")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--seed", type=int, help="master seed (default: $CFROBUST_SEED or 0)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--metric", choices=("l1", "l2sq"), help="reported distance (explain: regularization)")
    common.add_argument("--mode", choices=("closest", "plausible"))
    common.add_argument("--threshold-quantile", type=float, dest="threshold_quantile")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="cfrobust", description="Counterfactual explanations and their robustness.")
    sub = ap.add_subparsers(dest="command", required=True)

    def data_opts(p):
        p.add_argument("--dataset", help="CSV file (header row, label in last column)")
        p.add_argument("--model", choices=("linear", "softmax", "glvq", "tree"))
        p.add_argument("--pca-dims", type=int, dest="pca_dims")

    p = sub.add_parser("train", parents=[common], help="fit model, GMM and thresholds on a whole dataset")
    data_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", parents=[common], help="counterfactual for one sample")
    p.add_argument("model_file", help="model.json written by 'train'")
    p.add_argument("--dataset")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--x", help="comma-separated feature vector (instead of --dataset/--index)")
    p.add_argument("--target", type=int)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", parents=[common], help="cross-validated robustness experiment")
    data_opts(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("blobs", parents=[common], help="write a two-blob toy dataset")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n-per-class", type=int, default=100, dest="n_per_class")
    p.add_argument("--separation", type=float, default=2.0)
    p.set_defaults(func=cmd_blobs)

    p = sub.add_parser("dim-study", parents=[common], help="instability against input dimension")
    p.add_argument("--d-list", default="2,4,8,16,32", dest="d_list")
    p.add_argument("--models", default="tree,glvq")
    p.add_argument("--n-per-class", type=int, default=100, dest="n_per_class")
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--max-test-per-fold", type=int, dest="max_test_per_fold")
    p.set_defaults(func=cmd_dim_study)

    p = sub.add_parser("theory-check", parents=[common], help="Monte-Carlo check of the closed forms")
    p.add_argument("--d-list", default="2,5,10,50", dest="d_list")
    p.add_argument("--eps-list", default="0.1,0.5,1.0", dest="eps_list")
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--bound-trials", type=int, default=10_000, dest="bound_trials")
    p.add_argument("--tail-draws", type=int, default=100_000, dest="tail_draws")
    p.set_defaults(func=cmd_theory_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
