"""Counterfactual instability under input perturbations, plus closed-form references.

Instability is the expected distance between the counterfactual of a sample
and the counterfactual of a perturbed copy of it.  The perturbed copy is
explained towards ``target`` while it keeps the original prediction and back
towards the original label once the perturbation alone flips it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import LabeledSample, as_vector, distance
from .perturbation import PerturbationSpec

CSV_COLUMNS = (
    "fold",
    "index",
    "mode",
    "perturbation",
    "y_orig",
    "target",
    "perturbed_target",
    "flagged",
    "skipped",
    "reason",
    "distance",
    "cost_original",
    "cost_perturbed",
)


def perturbed_target(h, x_perturbed, y_orig: int, target: int, return_flag: bool = False):
    """Target label for the counterfactual of a perturbed sample.

    A prediction that is neither ``y_orig`` nor ``target`` (multiclass only)
    keeps ``target`` and raises the flag.
    """
    pred = int(h.predict(x_perturbed) if hasattr(h, "predict") else h(x_perturbed))
    if pred == int(y_orig):
        out, flag = int(target), False
    elif pred == int(target):
        out, flag = int(y_orig), False
    else:
        out, flag = int(target), True
    return (out, flag) if return_flag else out


def _list(v):
    return None if v is None else [float(t) for t in np.asarray(v).ravel()]


@dataclass
class InstabilityRecord:
    index: int
    y_orig: int
    target: int
    perturbed_target: Optional[int] = None
    flagged: bool = False
    distance: float = float("nan")
    skipped: bool = False
    reason: str = ""
    cost_original: float = float("nan")
    cost_perturbed: float = float("nan")
    origin: Optional[np.ndarray] = None
    perturbed: Optional[np.ndarray] = None
    cf_original: Optional[np.ndarray] = None
    cf_perturbed: Optional[np.ndarray] = None
    fold: int = -1
    mode: str = ""
    perturbation: str = ""

    def to_dict(self) -> dict:
        doc = {
            "fold": int(self.fold),
            "index": int(self.index),
            "mode": self.mode,
            "perturbation": self.perturbation,
            "y_orig": int(self.y_orig),
            "target": int(self.target),
            "perturbed_target": None if self.perturbed_target is None else int(self.perturbed_target),
            "flagged": bool(self.flagged),
            "skipped": bool(self.skipped),
            "reason": self.reason,
            "distance": None if self.skipped else float(self.distance),
            "cost_original": _finite_or_none(self.cost_original),
            "cost_perturbed": _finite_or_none(self.cost_perturbed),
        }
        for key in ("origin", "perturbed", "cf_original", "cf_perturbed"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = _list(value)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "InstabilityRecord":
        kw = dict(doc)
        for key in ("origin", "perturbed", "cf_original", "cf_perturbed"):
            if kw.get(key) is not None:
                kw[key] = np.asarray(kw[key], dtype=np.float64)
        for key in ("distance", "cost_original", "cost_perturbed"):
            if kw.get(key) is None:
                kw[key] = float("nan")
        return cls(**kw)

    def csv_row(self) -> list:
        d = self.to_dict()
        return ["" if d[c] is None else d[c] for c in CSV_COLUMNS]


def _finite_or_none(v):
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass
class InstabilityReport:
    """Per-sample records plus aggregates over the non-skipped ones."""

    records: list = field(default_factory=list)
    metric: str = "l2sq"
    spec: Optional[dict] = None

    @property
    def distances(self) -> np.ndarray:
        return np.array([r.distance for r in self.records if not r.skipped], dtype=np.float64)

    @property
    def count(self) -> int:
        return int(sum(not r.skipped for r in self.records))

    @property
    def skipped(self) -> int:
        return int(sum(r.skipped for r in self.records))

    @property
    def mean(self) -> float:
        d = self.distances
        return float(d.mean()) if d.size else float("nan")

    @property
    def median(self) -> float:
        d = self.distances
        return float(np.median(d)) if d.size else float("nan")

    @property
    def std_error(self) -> float:
        d = self.distances
        return float(d.std(ddof=1) / np.sqrt(d.size)) if d.size > 1 else float("nan")

    def __iter__(self):
        # allows ``mean, median, records = estimate_instability(...)``
        return iter((self.mean, self.median, self.records))

    def summary(self) -> dict:
        return {
            "count": self.count,
            "skipped": self.skipped,
            "mean": _finite_or_none(self.mean),
            "median": _finite_or_none(self.median),
        }

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "perturbation": self.spec,
            "summary": self.summary(),
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, doc: dict) -> "InstabilityReport":
        return cls([InstabilityRecord.from_dict(r) for r in doc["records"]], doc["metric"], doc.get("perturbation"))

    def to_csv(self, fh=None) -> Optional[str]:
        """Write one row per record in ``CSV_COLUMNS`` order; returns text when ``fh`` is None."""
        return write_records_csv(self.records, fh)


def write_records_csv(records, fh=None) -> Optional[str]:
    own = fh is None
    buf = io.StringIO() if own else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue() if own else None


def estimate_instability(
    model,
    cf_fn: Callable,
    x,
    target: int,
    spec: PerturbationSpec,
    n_draws: int,
    metric: str = "l2sq",
    *,
    label: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    store_points: bool = True,
) -> InstabilityReport:
    """Monte-Carlo estimate of the instability of ``cf_fn`` at one sample.

    ``cf_fn(x, target)`` must return a CounterfactualResult.  Perturbed
    samples whose counterfactual is infeasible are recorded as skipped.
    """
    if int(n_draws) < 1:
        raise ValueError("n_draws must be at least 1")
    if isinstance(x, LabeledSample):
        label = x.label if label is None else label
        x = x.features
    x = as_vector(x)
    pred = int(model.predict(x))
    y_orig = pred if label is None else int(label)
    if pred != y_orig:
        raise ValueError("the sample must be classified correctly")
    target = int(target)
    if target == y_orig:
        raise ValueError("target must differ from the sample's label")
    base = cf_fn(x, target)
    if not base.feasible:
        raise ValueError("no counterfactual exists for the original sample")
    rng = spec.rng() if rng is None else rng
    records = []
    for i in range(int(n_draws)):
        xp = spec.apply(x, rng)
        t, flag = perturbed_target(model, xp, y_orig, target, return_flag=True)
        cf = cf_fn(xp, t)
        rec = InstabilityRecord(
            index=i,
            y_orig=y_orig,
            target=target,
            perturbed_target=t,
            flagged=flag,
            cost_original=base.cost,
            cost_perturbed=cf.cost,
            perturbation=spec.label,
        )
        if cf.feasible:
            rec.distance = distance(base.point, cf.point, metric)
        else:
            rec.skipped, rec.reason = True, "perturbed counterfactual infeasible"
        if store_points:
            rec.origin, rec.perturbed, rec.cf_original = x, xp, base.point
            rec.cf_perturbed = cf.point if cf.feasible else None
        records.append(rec)
    return InstabilityReport(records, metric, spec.to_dict())


def fairness_check(x1, x2, h, eps1: float, eps2: float, dist=None, delta=None) -> bool:
    """Individual-fairness predicate: far apart, or treated alike.

    ``dist`` defaults to the Euclidean norm and ``delta`` to the 0/1 label
    disagreement; ``h`` may be a model or any callable.
    """
    if not (eps1 > 0 and eps2 >= 0):
        raise ValueError("thresholds must be positive")
    f = h.predict if hasattr(h, "predict") else h
    dist = dist or (lambda a, b: float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float))))
    delta = delta or (lambda a, b: 0.0 if np.array_equal(np.asarray(a), np.asarray(b)) else 1.0)
    return bool(dist(x1, x2) > eps1 or delta(f(x1), f(x2)) <= eps2)


def bound_general(eps: float, x_orig, x_cf, p: float = 2) -> float:
    """Upper bound on the counterfactual shift for perturbations with norm at most ``eps``."""
    diff = as_vector(x_orig) - as_vector(x_cf)
    return 2.0 * float(eps) + 2.0 * float(np.linalg.norm(diff, ord=p))


def bound_linear(eps: float, w, x_orig, b: float = 0.0) -> float:
    """Linear-model refinement; ``w`` must have unit norm."""
    return 2.0 * float(eps) + 2.0 * abs(float(as_vector(w) @ as_vector(x_orig) + b))


def instability_gaussian_linear(sigma, w) -> float:
    """Expected squared shift of linear counterfactuals under ``N(0, diag(sigma))``."""
    w = as_vector(w, "w")
    s = np.broadcast_to(np.asarray(sigma, dtype=np.float64), w.shape)
    return float(s.sum() - w @ (s * w))


def instability_uniform_linear(eps: float, d: int) -> float:
    """Expected squared shift of linear counterfactuals under ``U(-eps, eps)^d``."""
    return float(eps) ** 2 * (int(d) - 1) / 3.0


def tail_bound_gaussian(delta: float, d: int) -> float:
    """Markov bound on P(squared shift >= delta) under unit Gaussian noise, clipped to [0, 1]."""
    if delta <= 0:
        return 1.0
    return float(min(1.0, max(0.0, (int(d) - 1) / float(delta))))


def tail_bound_uniform(delta: float, eps: float, d: int) -> float:
    """Markov bound on P(squared shift >= delta) under uniform noise, clipped to [0, 1]."""
    if delta <= 0:
        return 1.0
    return float(min(1.0, max(0.0, instability_uniform_linear(eps, d) / float(delta))))
