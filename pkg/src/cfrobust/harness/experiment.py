"""Cross-validated robustness experiments and theory checks."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import spearmanr

from ..core import AffineMap, Dataset, distance
from ..counterfactual import CounterfactualGenerator, closest_cf, closest_cf_linear
from ..density import GmmDensity, choose_log_threshold, fit_gmm
from ..models import (
    GlvqModel,
    LinearBinaryModel,
    PipelineModel,
    SoftmaxModel,
    fit_glvq,
    fit_linear,
    fit_pca,
    fit_softmax,
    fit_standardizer,
    fit_tree,
    model_from_dict,
    model_to_dict,
)
from ..perturbation import PerturbationSpec
from ..robustness import (
    CSV_COLUMNS,
    InstabilityRecord,
    bound_general,
    bound_linear,
    estimate_instability,
    instability_gaussian_linear,
    instability_uniform_linear,
    perturbed_target,
    tail_bound_gaussian,
    write_records_csv,
)
from .data import BlobsSpec, kfold_indices, load_csv, make_blobs

log = logging.getLogger(__name__)

SCHEMA = 1
MODES = ("closest", "plausible")
MODEL_DEFAULTS = {
    "linear": {"epochs": 300, "lr": 1.0, "l2": 1e-3},
    "softmax": {"epochs": 300, "lr": 1.0, "l2": 1e-3},
    "glvq": {"prototypes_per_class": 3, "epochs": 100, "lr": 0.05},
    "tree": {"max_depth": 7},
}


def default_seed() -> int:
    return int(os.environ.get("CFROBUST_SEED", "0"))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one cross-validated run.

    ``perturbation`` holds one PerturbationSpec; with ``mask_sweep`` the
    run instead masks 1 up to half of the input features, one count at a time.
    """

    dataset: Optional[str] = None
    blobs: Optional[BlobsSpec] = None
    model: str = "softmax"
    model_params: dict = field(default_factory=dict)
    pca_dims: Optional[int] = None
    standardize: bool = True
    stratify: bool = True
    modes: tuple = MODES
    threshold_quantile: float = 0.25
    gmm_components: Optional[int] = None
    regularization: str = "l2sq"
    perturbation: Optional[PerturbationSpec] = None
    mask_sweep: bool = False
    metric: str = "l1"
    folds: int = 4
    seed: int = 0
    max_test_per_fold: Optional[int] = None
    workers: int = 1
    store_points: bool = True
    output: Optional[str] = None

    def __post_init__(self):
        if (self.dataset is None) == (self.blobs is None):
            raise ValueError("exactly one of dataset and blobs must be given")
        if self.dataset is not None and not Path(self.dataset).is_file():
            raise FileNotFoundError(f"dataset not found: {self.dataset}")
        if self.model not in MODEL_DEFAULTS:
            raise ValueError(f"unknown model kind {self.model!r}")
        unknown = set(self.model_params) - set(MODEL_DEFAULTS[self.model]) - {"seed"}
        if unknown:
            raise ValueError(f"unknown {self.model} hyperparameters: {sorted(unknown)}")
        modes = tuple(self.modes)
        if not modes or any(m not in MODES for m in modes):
            raise ValueError(f"modes must be a non-empty subset of {MODES}")
        object.__setattr__(self, "modes", modes)
        if int(self.folds) < 2:
            raise ValueError("folds must be at least 2")
        if not 0 < float(self.threshold_quantile) < 1:
            raise ValueError("threshold_quantile must lie in (0, 1)")
        if self.regularization not in ("l1", "l2sq"):
            raise ValueError("regularization must be l1 or l2sq")
        if self.regularization == "l1" and "plausible" in modes:
            raise ValueError("plausible counterfactuals support the l2sq regularization only")
        if self.metric not in ("l1", "l2sq"):
            raise ValueError("metric must be l1 or l2sq")
        if self.pca_dims is not None and int(self.pca_dims) < 1:
            raise ValueError("pca_dims must be positive")
        if self.max_test_per_fold is not None and int(self.max_test_per_fold) < 1:
            raise ValueError("max_test_per_fold must be positive")
        if self.perturbation is None:
            object.__setattr__(self, "perturbation", PerturbationSpec("gaussian", sigma=1.0, seed=self.seed))

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "blobs": None if self.blobs is None else self.blobs.to_dict(),
            "model": self.model,
            "model_params": dict(self.model_params),
            "pca_dims": self.pca_dims,
            "standardize": self.standardize,
            "stratify": self.stratify,
            "modes": list(self.modes),
            "threshold_quantile": float(self.threshold_quantile),
            "gmm_components": self.gmm_components,
            "regularization": self.regularization,
            "perturbation": self.perturbation.to_dict(),
            "mask_sweep": self.mask_sweep,
            "metric": self.metric,
            "folds": int(self.folds),
            "seed": int(self.seed),
            "max_test_per_fold": self.max_test_per_fold,
            "workers": int(self.workers),
            "store_points": self.store_points,
            "output": self.output,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        doc.pop("schema", None)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if "seed" not in doc:
            doc["seed"] = default_seed()
        if doc.get("blobs") is not None:
            doc["blobs"] = BlobsSpec(**doc["blobs"])
        if doc.get("perturbation") is not None:
            pert = dict(doc["perturbation"])
            pert.setdefault("seed", doc["seed"])
            doc["perturbation"] = PerturbationSpec.from_dict(pert)
        if "modes" in doc:
            doc["modes"] = tuple(doc["modes"])
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            doc = json.load(fh)
        base = Path(path).parent
        if doc.get("dataset") and not Path(doc["dataset"]).is_absolute():
            doc["dataset"] = str(base / doc["dataset"])
        return cls.from_dict(doc)


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    return load_csv(cfg.dataset) if cfg.dataset is not None else make_blobs(cfg.blobs)


@dataclass(frozen=True)
class FittedPipeline:
    model: object
    gmm: Optional[GmmDensity]
    log_thresholds: Optional[np.ndarray]
    preprocess: AffineMap

    def generator(self, mode: str, regularization: str = "l2sq") -> CounterfactualGenerator:
        if mode == "closest":
            return CounterfactualGenerator(self.model, "closest", regularization)
        return CounterfactualGenerator(self.model, "plausible", regularization, self.gmm, self.log_thresholds)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "model": model_to_dict(self.model),
            "gmm": None if self.gmm is None else self.gmm.to_dict(),
            "log_thresholds": None if self.log_thresholds is None else [float(v) for v in self.log_thresholds],
            "preprocess": {"matrix": self.preprocess.matrix.tolist(), "offset": self.preprocess.offset.tolist()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FittedPipeline":
        pre = doc["preprocess"]
        return cls(
            model_from_dict(doc["model"]),
            None if doc.get("gmm") is None else GmmDensity.from_dict(doc["gmm"]),
            None if doc.get("log_thresholds") is None else np.array(doc["log_thresholds"], dtype=np.float64),
            AffineMap(np.array(pre["matrix"], dtype=np.float64), np.array(pre["offset"], dtype=np.float64)),
        )


def _fit_inner(kind: str, data: Dataset, params: dict, seed: int):
    p = {**MODEL_DEFAULTS[kind], **params}
    p.pop("seed", None)
    if kind == "linear":
        if data.n_classes != 2:
            raise ValueError("the linear model is binary; use softmax for more classes")
        return fit_linear(data, **p)
    if kind == "softmax":
        return fit_softmax(data, **p)
    if kind == "glvq":
        return fit_glvq(data, seed=int(params.get("seed", seed)), **p)
    return fit_tree(data, **p)


def fit_pipeline(train: Dataset, cfg: ExperimentConfig, seed: int, with_density: bool = True) -> FittedPipeline:
    """Fit preprocessing, classifier and (optionally) the class densities on ``train`` only."""
    amap = AffineMap.identity(train.dim)
    if cfg.standardize:
        amap = fit_standardizer(train.X)
    if cfg.pca_dims is not None:
        amap = amap.then(fit_pca(amap(train.X), int(cfg.pca_dims)))
    inner = _fit_inner(cfg.model, Dataset(amap(train.X), train.y, (), train.n_classes), cfg.model_params, seed)
    model = PipelineModel(inner, amap)
    if isinstance(inner, LinearBinaryModel):
        model = model.to_linear()
    gmm = lt = None
    if with_density:
        gmm = fit_gmm(train, n_components=cfg.gmm_components, seed=seed)
        lt = choose_log_threshold(gmm, train, cfg.threshold_quantile)
    return FittedPipeline(model, gmm, lt, amap)


def _perturbations(cfg: ExperimentConfig, d: int) -> list:
    if not cfg.mask_sweep:
        return [cfg.perturbation]
    seed = cfg.perturbation.seed if cfg.perturbation.kind == "mask" else cfg.seed
    return [PerturbationSpec("mask", mask=k, seed=seed) for k in range(1, max(1, d // 2) + 1)]


def _sample_rng(seed: int, *stream) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def _run_fold(cfg: ExperimentConfig, data: Dataset, fold: int, train_idx, test_idx) -> dict:
    """Evaluate one fold; returns fold metadata and its records in sample order."""
    if len(test_idx) == 0:
        raise ValueError(f"fold {fold}: empty test split")
    train = data.subset(train_idx)
    try:
        fitted = fit_pipeline(train, cfg, seed=cfg.seed + 7919 * fold, with_density="plausible" in cfg.modes)
    except Exception as exc:
        raise RuntimeError(f"fold {fold}: training failed: {exc}") from exc
    pred = np.array([fitted.model.predict(x) for x in data.X[test_idx]])
    correct = np.asarray(test_idx)[pred == data.y[test_idx]]
    if cfg.max_test_per_fold is not None and correct.size > cfg.max_test_per_fold:
        pick = _sample_rng(cfg.seed, 2, fold).choice(correct.size, cfg.max_test_per_fold, replace=False)
        correct = np.sort(correct[pick])
    perts = _perturbations(cfg, data.dim)
    gens = {m: fitted.generator(m, cfg.regularization) for m in cfg.modes}
    records = []
    for idx in correct:
        x, y = data.X[idx], int(data.y[idx])
        if data.n_classes == 2:
            target = 1 - y
        else:
            others = [c for c in range(data.n_classes) if c != y]
            target = int(_sample_rng(cfg.seed, 1, fold, idx).choice(others))
        perturbed = [p.apply(x, p.rng(fold, idx, j)) for j, p in enumerate(perts)]
        for mode in cfg.modes:
            base = gens[mode](x, target)
            for p, xp in zip(perts, perturbed):
                rec = InstabilityRecord(
                    index=int(idx), y_orig=y, target=target, fold=fold, mode=mode, perturbation=p.label,
                    cost_original=base.cost,
                )
                if cfg.store_points:
                    rec.origin, rec.perturbed = x, xp
                if not base.feasible:
                    rec.skipped, rec.reason = True, "original counterfactual infeasible"
                    records.append(rec)
                    continue
                t, flag = perturbed_target(fitted.model, xp, y, target, return_flag=True)
                cf = gens[mode](xp, t)
                rec.perturbed_target, rec.flagged, rec.cost_perturbed = t, flag, cf.cost
                if cfg.store_points:
                    rec.cf_original = base.point
                    rec.cf_perturbed = cf.point if cf.feasible else None
                if cf.feasible:
                    rec.distance = distance(base.point, cf.point, cfg.metric)
                else:
                    rec.skipped, rec.reason = True, "perturbed counterfactual infeasible"
                records.append(rec)
    meta = {
        "fold": fold,
        "n_train": int(len(train_idx)),
        "n_test": int(len(test_idx)),
        "accuracy": float(np.mean(pred == data.y[test_idx])),
        "n_evaluated": int(correct.size),
    }
    if fitted.gmm is not None:
        meta["gmm_components"] = list(fitted.gmm.n_components)
        meta["log_thresholds"] = [float(v) for v in fitted.log_thresholds]
    return {"meta": meta, "records": [r.to_dict() for r in records]}


def summarize(records: list) -> dict:
    """Aggregates per (mode, perturbation), recomputable from the records."""
    groups: dict = {}
    for r in records:
        groups.setdefault(r["mode"], {}).setdefault(r["perturbation"], []).append(r)
    out = {}
    for mode, by_pert in groups.items():
        out[mode] = {}
        for label, recs in by_pert.items():
            dist = np.array([r["distance"] for r in recs if not r["skipped"]], dtype=np.float64)
            out[mode][label] = {
                "count": int(dist.size),
                "skipped": int(len(recs) - dist.size),
                "flagged": int(sum(r["flagged"] for r in recs)),
                "median": float(np.median(dist)) if dist.size else None,
                "mean": float(dist.mean()) if dist.size else None,
            }
    return out


def run_experiment(cfg: ExperimentConfig, data: Optional[Dataset] = None) -> dict:
    data = load_dataset(cfg) if data is None else data
    splits = kfold_indices(data.y, cfg.folds, cfg.seed, cfg.stratify)
    jobs = [(cfg, data, k, tr, te) for k, (tr, te) in enumerate(splits)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=int(cfg.workers)) as pool:
            results = list(pool.map(_run_fold, *zip(*jobs)))
    else:
        results = [_run_fold(*job) for job in jobs]
    records = [r for res in results for r in res["records"]]
    doc = {
        "schema": SCHEMA,
        "config": cfg.to_dict(),
        "dataset": {"n": data.n, "d": data.dim, "n_classes": data.n_classes},
        "folds": [res["meta"] for res in results],
        "summary": summarize(records),
        "records": records,
    }
    if cfg.output:
        write_outputs(doc, cfg.output)
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False)


def write_outputs(doc: dict, out_dir, stem: str = "result") -> dict:
    """Write ``<stem>.json``, the per-sample CSV and the plot-data CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / f"{stem}.json"}
    paths["json"].write_text(dumps(doc) + "\n")
    if "records" in doc:
        paths["csv"] = out / f"{stem}_samples.csv"
        with paths["csv"].open("w", newline="") as fh:
            write_records_csv([InstabilityRecord.from_dict(_csv_fields(r)) for r in doc["records"]], fh)
    rows = plot_rows(doc)
    if rows:
        paths["plot"] = out / f"{stem}_plot.csv"
        with paths["plot"].open("w") as fh:
            fh.write(",".join(rows[0].keys()) + "\n")
            for row in rows:
                fh.write(",".join("" if v is None else str(v) for v in row.values()) + "\n")
    return {k: str(v) for k, v in paths.items()}


def _csv_fields(r: dict) -> dict:
    return {k: r[k] for k in CSV_COLUMNS}


def plot_rows(doc: dict) -> list:
    """Flat (series, x, median, mean, count) rows for plotting."""
    rows = []
    if "curves" in doc:
        for kind, curve in doc["curves"].items():
            for pt in curve:
                rows.append({"series": kind, "x": pt["d"], "median": pt["median"], "mean": pt["mean"], "count": pt["count"]})
        return rows
    for mode, by_pert in doc.get("summary", {}).items():
        for label, agg in by_pert.items():
            x = label.split(":", 1)[1] if label.startswith("mask:") else label
            rows.append({"series": mode, "x": x, "median": agg["median"], "mean": agg["mean"], "count": agg["count"]})
    return rows


def run_dimensionality_study(
    d_list=(2, 4, 8, 16, 32),
    model_kinds=("tree", "glvq"),
    seed: int = 0,
    n_per_class: int = 100,
    separation: float = 2.0,
    folds: int = 4,
    metric: str = "l1",
    max_test_per_fold: Optional[int] = None,
    output: Optional[str] = None,
) -> dict:
    """Median closest-counterfactual instability on blobs of growing dimension."""
    curves = {}
    for kind in model_kinds:
        pts = []
        for d in d_list:
            cfg = ExperimentConfig(
                blobs=BlobsSpec(int(d), n_per_class, separation, seed),
                model=kind,
                modes=("closest",),
                perturbation=PerturbationSpec("gaussian", sigma=1.0, seed=seed),
                metric=metric,
                folds=folds,
                seed=seed,
                max_test_per_fold=max_test_per_fold,
                store_points=False,
            )
            agg = run_experiment(cfg)["summary"]["closest"]["gaussian"]
            pts.append({"d": int(d), **agg})
        curves[kind] = pts
    trend = {}
    for kind, pts in curves.items():
        med = [p["median"] for p in pts]
        rho = spearmanr([p["d"] for p in pts], med).statistic if len(pts) > 1 else float("nan")
        trend[kind] = None if not np.isfinite(rho) else float(rho)
    doc = {
        "schema": SCHEMA,
        "config": {
            "d_list": [int(d) for d in d_list],
            "model_kinds": list(model_kinds),
            "seed": int(seed),
            "n_per_class": int(n_per_class),
            "separation": float(separation),
            "folds": int(folds),
            "metric": metric,
            "max_test_per_fold": max_test_per_fold,
        },
        "curves": curves,
        "spearman": trend,
    }
    if output:
        write_outputs(doc, output, "dim_study")
    return doc


def _unit(rng, d):
    w = rng.standard_normal(d)
    return w / np.linalg.norm(w)


def theory_check(
    d_list=(2, 5, 10, 50),
    sigma_list=("identity", "random"),
    eps_list=(0.1, 0.5, 1.0),
    draws: int = 10_000,
    seed: int = 0,
    bound_trials: int = 10_000,
    z_max: float = 3.0,
) -> dict:
    """Monte-Carlo agreement with the closed forms for linear counterfactuals.

    Each Gaussian and uniform case reports the z-score of the Monte-Carlo mean
    against the closed form; the bound suites report violation counts.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7E0]))
    cases = []

    def add(name, d, expected, report):
        se = report.std_error
        z = 0.0 if se == 0 or not np.isfinite(se) else (report.mean - expected) / se
        if se == 0:
            z = 0.0 if abs(report.mean - expected) <= 1e-12 else float("inf")
        cases.append(
            {
                "case": name,
                "d": int(d),
                "expected": float(expected),
                "mc_mean": float(report.mean),
                "std_error": float(se),
                "z": float(z),
                "pass": bool(abs(z) <= z_max),
            }
        )

    for d in d_list:
        w = _unit(rng, d)
        model = LinearBinaryModel(w, float(rng.normal()), (0, 1))
        x = rng.standard_normal(d)
        y = int(model.predict(x))
        gen = CounterfactualGenerator(model)
        for s in sigma_list:
            sigma = np.ones(d) if s == "identity" else rng.uniform(0.1, 4.0, d)
            spec = PerturbationSpec("gaussian", sigma=sigma, seed=int(rng.integers(2**31)))
            rep = estimate_instability(model, gen, x, 1 - y, spec, draws, "l2sq", store_points=False)
            add(f"gaussian:{s}", d, instability_gaussian_linear(sigma, w), rep)
        for eps in eps_list:
            spec = PerturbationSpec("uniform", eps=eps, seed=int(rng.integers(2**31)))
            rep = estimate_instability(model, gen, x, 1 - y, spec, draws, "l2sq", store_points=False)
            add(f"uniform:{eps:g}", d, instability_uniform_linear(eps, d), rep)

    bounds = bound_violations(bound_trials, seed)
    return {
        "schema": SCHEMA,
        "config": {
            "d_list": [int(d) for d in d_list],
            "sigma_list": list(sigma_list),
            "eps_list": [float(e) for e in eps_list],
            "draws": int(draws),
            "seed": int(seed),
            "bound_trials": int(bound_trials),
        },
        "cases": cases,
        "bounds": bounds,
        "pass": bool(all(c["pass"] for c in cases) and bounds["general_violations"] == 0 and bounds["linear_violations"] == 0),
    }


def _random_model(rng, d: int, family: str):
    if family == "linear":
        return LinearBinaryModel(_unit(rng, d), float(rng.normal()), (0, 1))
    if family == "softmax":
        return SoftmaxModel(rng.standard_normal((3, d)), rng.standard_normal(3))
    return GlvqModel(rng.standard_normal((4, d)) * 2.0, np.array([0, 0, 1, 1]))


def bound_violations(trials: int = 10_000, seed: int = 0, rel_tol: float = 1e-9) -> dict:
    """Count violations of the counterfactual-shift bounds under bounded perturbations.

    Trials cycle through random linear, 3-class softmax and GLVQ models.
    Perturbations are uniform in the Euclidean ball of radius eps and the
    counterfactuals are exact Euclidean projections onto the target region.
    The linear refinement is checked on the linear trials only.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB0D]))
    families = ("linear", "softmax", "glvq")
    general = linear = 0
    worst = 0.0
    counts = dict.fromkeys(families, 0)
    for i in range(int(trials)):
        family = families[i % len(families)]
        d = int(rng.integers(1, 21)) if family == "linear" else int(rng.integers(2, 6))
        model = _random_model(rng, d, family)
        x = rng.normal(scale=2.0, size=d)
        eps = float(rng.uniform(0.0, 2.0))
        xp = x + _unit(rng, d) * eps * rng.uniform() ** (1.0 / d)
        y = int(model.predict(x))
        others = [c for c in model.classes if c != y]
        target = int(others[rng.integers(len(others))])
        t = perturbed_target(model, xp, y, target)
        if family == "linear":
            cf = closest_cf_linear(x, model, target).point
            cfp = closest_cf_linear(xp, model, t).point
        else:
            cf = closest_cf(x, model, target).point
            cfp = closest_cf(xp, model, t).point
        shift = float(np.linalg.norm(cf - cfp))
        bg = bound_general(eps, x, cf, 2)
        general += shift > bg * (1 + rel_tol) + rel_tol
        if family == "linear":
            linear += shift > bound_linear(eps, model.w, x, model.b) * (1 + rel_tol) + rel_tol
        worst = max(worst, shift / bg) if bg > 0 else worst
        counts[family] += 1
    return {
        "trials": int(trials),
        "by_family": counts,
        "general_violations": int(general),
        "linear_violations": int(linear),
        "max_ratio": float(worst),
    }


def tail_check(d_list=(2, 5, 10), factors=(1, 2, 5), draws: int = 100_000, seed: int = 0) -> list:
    """Empirical tail of the squared shift against its Markov bound (unit Gaussian noise)."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7A1]))
    rows = []
    for d in d_list:
        w = _unit(rng, d)
        model = LinearBinaryModel(w, float(rng.normal()), (0, 1))
        x = rng.standard_normal(d)
        y = int(model.predict(x))
        spec = PerturbationSpec("gaussian", sigma=1.0, seed=int(rng.integers(2**31)))
        rep = estimate_instability(model, CounterfactualGenerator(model), x, 1 - y, spec, draws, "l2sq", store_points=False)
        dist = rep.distances
        for f in factors:
            delta = float(f * d)
            emp = float(np.mean(dist >= delta))
            bound = tail_bound_gaussian(delta, d)
            rows.append({"d": int(d), "delta": delta, "empirical": emp, "bound": bound, "violated": bool(emp > bound)})
    return rows
