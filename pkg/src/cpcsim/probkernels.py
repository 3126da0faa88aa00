"""Closed-form probability helpers shared by the agents, the free-energy
evaluator and the oracle.

Everything works in log space. Gaussian log-densities can be positive, so
nothing here assumes a log-likelihood is <= 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp as _scipy_logsumexp
from scipy.special import gammaln

from . import kernels

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussCatHyper:
    """Prior hyperparameters for one agent's Gaussian/categorical model.

    ``ng_mean0`` may be ``None``, meaning "use the agent's own current data
    mean", refreshed on every parameter update.
    """

    dirichlet_alpha: float = 1.0
    ng_mean0: tuple[float, ...] | None = None
    ng_kappa0: float = 0.01
    ng_a0: float = 1.0
    ng_b0: float = 1.0
    num_signs: int = 4
    num_categories: int = 4

    def __post_init__(self):
        for name in ("dirichlet_alpha", "ng_kappa0", "ng_a0", "ng_b0"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a finite positive number, got {value!r}")
        if int(self.num_signs) != self.num_signs or self.num_signs < 1:
            raise ValueError(f"num_signs must be a positive integer, got {self.num_signs!r}")
        if int(self.num_categories) != self.num_categories or self.num_categories < 1:
            raise ValueError(
                f"num_categories must be a positive integer, got {self.num_categories!r}"
            )
        if self.ng_mean0 is not None:
            object.__setattr__(self, "ng_mean0", tuple(float(v) for v in self.ng_mean0))

    def to_dict(self) -> dict:
        return {
            "dirichlet_alpha": self.dirichlet_alpha,
            "ng_mean0": None if self.ng_mean0 is None else list(self.ng_mean0),
            "ng_kappa0": self.ng_kappa0,
            "ng_a0": self.ng_a0,
            "ng_b0": self.ng_b0,
            "num_signs": self.num_signs,
            "num_categories": self.num_categories,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussCatHyper":
        return cls(**d)


class NormalGammaPosterior(NamedTuple):
    mean: np.ndarray
    kappa: np.ndarray
    a: np.ndarray
    b: np.ndarray


def log_gaussian_diag(x, mean, precision) -> float:
    """Log density of a diagonal Gaussian parameterised by per-feature precision."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    precision = np.asarray(precision, dtype=float)
    if x.ndim != 1 or x.shape != mean.shape or x.shape != precision.shape:
        raise ValueError(
            f"dimension mismatch: x{x.shape}, mean{mean.shape}, precision{precision.shape}"
        )
    if np.any(~(precision > 0)):
        raise ValueError("precision entries must be strictly positive")
    diff = x - mean
    return float(np.sum(0.5 * np.log(precision) - 0.5 * LOG_2PI - 0.5 * precision * diff * diff))


def log_gaussian_matrix(x: np.ndarray, means: np.ndarray, precisions: np.ndarray) -> np.ndarray:
    """Batched :func:`log_gaussian_diag`.

    ``x`` is (N, M), ``means`` and ``precisions`` are (Z, M); returns (N, Z).
    """
    x = np.asarray(x, dtype=float)
    diff = x[:, None, :] - means[None, :, :]
    const = np.sum(0.5 * np.log(precisions) - 0.5 * LOG_2PI, axis=1)
    return const[None, :] - 0.5 * np.sum(precisions[None, :, :] * diff * diff, axis=2)


def normal_gamma_update(mean0, kappa0, a0, b0, data) -> NormalGammaPosterior:
    """Conjugate Normal-Gamma update, independently per feature.

    ``data`` is (n,) for a single feature or (n, M). With n == 0 the prior
    is returned unchanged.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n = data.shape[0]
    m = data.shape[1]
    mean0 = np.broadcast_to(np.asarray(mean0, dtype=float), (m,)).copy()
    kappa0 = np.broadcast_to(np.asarray(kappa0, dtype=float), (m,)).copy()
    a0 = np.broadcast_to(np.asarray(a0, dtype=float), (m,)).copy()
    b0 = np.broadcast_to(np.asarray(b0, dtype=float), (m,)).copy()
    if n == 0:
        return NormalGammaPosterior(mean0, kappa0, a0, b0)
    if not np.all(np.isfinite(data)):
        raise ValueError("data must be finite")
    xbar = data.mean(axis=0)
    ss = np.sum((data - xbar) ** 2, axis=0)
    kappa_n = kappa0 + n
    mean_n = (kappa0 * mean0 + n * xbar) / kappa_n
    a_n = a0 + 0.5 * n
    b_n = b0 + 0.5 * ss + 0.5 * kappa0 * n * (xbar - mean0) ** 2 / kappa_n
    return NormalGammaPosterior(mean_n, kappa_n, a_n, b_n)


def normal_gamma_predictive_logpdf(x, post: NormalGammaPosterior) -> np.ndarray:
    """Student-t posterior predictive log density, per feature.

    ``x`` broadcasts against the posterior's per-feature arrays.
    """
    x = np.asarray(x, dtype=float)
    nu = 2.0 * post.a
    scale2 = post.b * (post.kappa + 1.0) / (post.a * post.kappa)
    z = (x - post.mean) ** 2 / scale2
    return (
        gammaln(0.5 * (nu + 1.0))
        - gammaln(0.5 * nu)
        - 0.5 * np.log(nu * math.pi * scale2)
        - 0.5 * (nu + 1.0) * np.log1p(z / nu)
    )


def dirichlet_predictive(counts, alpha: float) -> np.ndarray:
    """Posterior predictive of a symmetric Dirichlet-categorical.

    Works row-wise on the last axis, so a (W, Z) count matrix gives the
    (W, Z) table of p(z | w).
    """
    counts = np.asarray(counts, dtype=float)
    if counts.ndim == 0 or counts.shape[-1] < 1:
        raise ValueError("counts must have at least one entry")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    num = counts + alpha
    return num / num.sum(axis=-1, keepdims=True)


def log_sum_exp(values, axis=None):
    """Numerically stable ``log(sum(exp(values)))``.

    Rows that are entirely ``-inf`` give ``-inf``.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("log_sum_exp of an empty input")
    if values.ndim == 1 and values.shape[0] == 1 and axis is None:
        return float(values[0])
    out = _scipy_logsumexp(values, axis=axis)
    return float(out) if np.ndim(out) == 0 else out


def normalize_log_weights(log_weights: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a (N, K) log-weight matrix."""
    lw = np.asarray(log_weights, dtype=float)
    top = np.max(lw, axis=-1, keepdims=True)
    if np.any(~np.isfinite(top)):
        raise ValueError("every row needs at least one finite log-weight")
    p = np.exp(lw - top)
    return p / p.sum(axis=-1, keepdims=True)


def cdf_rows(probs: np.ndarray) -> np.ndarray:
    return np.cumsum(probs, axis=-1)


def sample_log_weights(log_weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling of one index per row, given pre-drawn uniforms."""
    cdf = cdf_rows(normalize_log_weights(log_weights))
    return kernels.sample_rows(np.ascontiguousarray(cdf), np.ascontiguousarray(u, dtype=float))


def categorical_sample(log_weights, rng: np.random.Generator) -> int:
    """Draw one index with probability proportional to ``exp(log_weights)``.

    Consumes exactly one uniform from ``rng``.
    """
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise ValueError("log_weights must be a non-empty vector")
    if not np.any(np.isfinite(lw)):
        raise ValueError("all log-weights are -inf")
    u = rng.random()
    return int(sample_log_weights(lw[None, :], np.array([u]))[0])


def kl_categorical(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise KL[p || q] with the 0·log0 = 0 convention."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(q)), 0.0)
    return terms.sum(axis=-1)
