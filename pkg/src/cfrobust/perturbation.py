"""Input perturbations: additive Gaussian, additive uniform, feature masking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import as_vector

KINDS = ("gaussian", "uniform", "mask")


def perturb_gaussian(x, sigma, rng: np.random.Generator) -> np.ndarray:
    """``x + N(0, diag(sigma))``; ``sigma`` holds variances (scalar or per coordinate)."""
    x = as_vector(x)
    var = np.broadcast_to(np.asarray(sigma, dtype=np.float64), x.shape)
    if np.any(var < 0) or not np.all(np.isfinite(var)):
        raise ValueError("variances must be finite and nonnegative")
    return x + np.sqrt(var) * rng.standard_normal(x.shape[0])


def perturb_uniform(x, eps: float, rng: np.random.Generator) -> np.ndarray:
    """``x + U(-eps, eps)`` i.i.d. per coordinate."""
    x = as_vector(x)
    eps = float(eps)
    if not eps > 0 or not np.isfinite(eps):
        raise ValueError("eps must be positive")
    return x + rng.uniform(-eps, eps, x.shape[0])


def mask_indices(d: int, mask, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Resolve a count (random, without replacement) or explicit index set."""
    if np.isscalar(mask) and not isinstance(mask, (list, tuple)):
        count = int(mask)
        if count < 0 or count > d:
            raise ValueError(f"mask count must lie in [0, {d}]")
        if rng is None:
            raise ValueError("a random generator is required for a mask count")
        return np.sort(rng.choice(d, size=count, replace=False))
    idx = np.asarray(mask, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= d):
        raise ValueError(f"mask index out of range for d={d}")
    return np.unique(idx)


def perturb_mask(x, mask, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Zero out the masked features."""
    x = as_vector(x)
    out = x.copy()
    out[mask_indices(x.shape[0], mask, rng)] = 0.0
    return out


@dataclass(frozen=True)
class PerturbationSpec:
    """One perturbation family with its parameter.

    ``sigma`` are Gaussian variances, ``eps`` the uniform half-width and
    ``mask`` a count or an explicit index tuple.
    """

    kind: str
    sigma: object = 1.0
    eps: float = 0.1
    mask: object = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "gaussian":
            s = np.asarray(self.sigma, dtype=np.float64)
            if s.ndim > 1 or np.any(s < 0) or not np.all(np.isfinite(s)):
                raise ValueError("sigma must be a nonnegative scalar or diagonal")
            object.__setattr__(self, "sigma", float(s) if s.ndim == 0 else tuple(float(v) for v in s))
        elif self.kind == "uniform":
            if not float(self.eps) > 0:
                raise ValueError("eps must be positive")
        else:
            if isinstance(self.mask, (list, tuple, np.ndarray)):
                idx = np.asarray(self.mask, dtype=np.int64).ravel()
                if idx.size and idx.min() < 0:
                    raise ValueError("mask indices must be nonnegative")
                object.__setattr__(self, "mask", tuple(int(i) for i in idx))
            elif int(self.mask) < 0:
                raise ValueError("mask count must be nonnegative")

    @property
    def label(self) -> str:
        if self.kind == "gaussian":
            return "gaussian"
        if self.kind == "uniform":
            return f"uniform:{self.eps:g}"
        if isinstance(self.mask, tuple):
            return "mask:" + "-".join(map(str, self.mask))
        return f"mask:{int(self.mask)}"

    def rng(self, *stream) -> np.random.Generator:
        """Independent generator for a stream index (e.g. fold, sample)."""
        return np.random.default_rng(np.random.SeedSequence([int(self.seed), *map(int, stream)]))

    def apply(self, x, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return perturb_gaussian(x, self.sigma, rng)
        if self.kind == "uniform":
            return perturb_uniform(x, self.eps, rng)
        return perturb_mask(x, self.mask, rng)

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "seed": int(self.seed)}
        if self.kind == "gaussian":
            doc["sigma"] = list(self.sigma) if isinstance(self.sigma, tuple) else self.sigma
        elif self.kind == "uniform":
            doc["eps"] = float(self.eps)
        else:
            doc["mask"] = list(self.mask) if isinstance(self.mask, tuple) else int(self.mask)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PerturbationSpec":
        keys = {"kind", "sigma", "eps", "mask", "seed"}
        extra = set(doc) - keys
        if extra:
            raise ValueError(f"unknown perturbation fields: {sorted(extra)}")
        return cls(**doc)

