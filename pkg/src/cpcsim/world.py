"""Synthetic multi-agent worlds and the observation file format.

Each agent sees every object through its own modality: category means are
drawn independently per agent, so raw features are not comparable across
agents and signs are the only common currency.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .seeding import SHIFT, WORLD, derive_rng

SHIFT_KINDS = ("translate", "permute")


class ObservationFormatError(ValueError):
    """Raised for malformed observation files; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class ShiftSpec:
    shift_round: int
    kind: str = "translate"
    magnitude: float = 0.0

    def __post_init__(self):
        if self.kind not in SHIFT_KINDS:
            raise ValueError(f"shift kind must be one of {SHIFT_KINDS}, got {self.kind!r}")
        if not math.isfinite(self.magnitude):
            raise ValueError("shift magnitude must be finite")
        if self.kind == "permute" and not 0.0 <= self.magnitude <= 1.0:
            raise ValueError("permute magnitude is a fraction of objects in [0, 1]")


@dataclass(frozen=True)
class WorldConfig:
    num_objects: int = 100
    num_true_categories: int = 4
    num_agents: int = 2
    feature_dim: int = 2
    category_separation: float = 5.0
    noise_scale: float = 1.0
    shift: ShiftSpec | None = None
    seed: int = 0
    num_viewpoints: int = 1

    def __post_init__(self):
        if self.num_true_categories < 1:
            raise ValueError("num_true_categories must be >= 1")
        if self.num_objects < self.num_true_categories:
            raise ValueError("num_objects must be >= num_true_categories")
        if self.num_agents < 2:
            raise ValueError("num_agents must be >= 2")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if not self.category_separation > 0:
            raise ValueError("category_separation must be > 0")
        if not self.noise_scale > 0:
            raise ValueError("noise_scale must be > 0")
        if self.num_viewpoints < 1:
            raise ValueError("num_viewpoints must be >= 1")


@dataclass
class ObservationSet:
    observations: np.ndarray  # (K, D, M)
    contexts: np.ndarray  # (K, D) int
    ground_truth: np.ndarray | None = None  # (D,) int, hidden from agents
    num_true_categories: int | None = field(default=None)

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=float)
        self.contexts = np.asarray(self.contexts, dtype=np.int64)
        if self.observations.ndim != 3:
            raise ValueError("observations must be (agents, objects, features)")
        if self.contexts.shape != self.observations.shape[:2]:
            raise ValueError("contexts must be (agents, objects)")
        if not np.all(np.isfinite(self.observations)):
            raise ValueError("observations must be finite")
        if self.ground_truth is not None:
            self.ground_truth = np.asarray(self.ground_truth, dtype=np.int64)
            if self.ground_truth.shape != (self.num_objects,):
                raise ValueError("ground_truth must have one label per object")
            if np.any(self.ground_truth < 0):
                raise ValueError("ground_truth labels must be non-negative")
            if self.num_true_categories is None:
                self.num_true_categories = int(self.ground_truth.max()) + 1
            elif np.any(self.ground_truth >= self.num_true_categories):
                raise ValueError("ground_truth label out of range")

    @property
    def num_agents(self) -> int:
        return self.observations.shape[0]

    @property
    def num_objects(self) -> int:
        return self.observations.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.observations.shape[2]

    def require_ground_truth(self) -> np.ndarray:
        if self.ground_truth is None:
            raise ValueError("this observation set carries no ground-truth labels")
        return self.ground_truth

    def equals(self, other: "ObservationSet") -> bool:
        if self.ground_truth is None or other.ground_truth is None:
            gt_eq = self.ground_truth is None and other.ground_truth is None
        else:
            gt_eq = np.array_equal(self.ground_truth, other.ground_truth)
        return (
            gt_eq
            and np.array_equal(self.observations, other.observations)
            and np.array_equal(self.contexts, other.contexts)
        )


def _category_means(rng, num_categories, dim, separation):
    center = rng.normal(0.0, separation, size=dim)
    if dim >= num_categories:
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        # scaled simplex corners: every pair exactly `separation` apart
        return center + (separation / math.sqrt(2.0)) * q[:, :num_categories].T
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    slots = rng.permutation(num_categories) - 0.5 * (num_categories - 1)
    return center + separation * slots[:, None] * direction[None, :]


def _draws(config: WorldConfig):
    rng = derive_rng(config.seed, WORLD)
    c, k, d, m, v = (
        config.num_true_categories,
        config.num_agents,
        config.num_objects,
        config.feature_dim,
        config.num_viewpoints,
    )
    truth = rng.permutation(np.arange(d) % c).astype(np.int64)
    means = np.empty((k, v, c, m))
    for a in range(k):
        for view in range(v):
            means[a, view] = _category_means(rng, c, m, config.category_separation)
    viewpoints = rng.integers(v, size=k) if v > 1 else np.zeros(k, dtype=np.int64)
    noise = rng.standard_normal((k, d, m))
    return truth, means, viewpoints.astype(np.int64), noise


def _emit(config, truth, means, viewpoints, noise):
    agent_means = means[np.arange(config.num_agents), viewpoints]  # (K, C, M)
    obs = agent_means[:, truth, :] + config.noise_scale * noise
    contexts = np.repeat(viewpoints[:, None], config.num_objects, axis=1)
    return ObservationSet(obs, contexts, truth.copy(), config.num_true_categories)


def generate_world(config: WorldConfig) -> ObservationSet:
    """Draw a world; a pure function of ``config``."""
    return _emit(config, *_draws(config))


def true_category_means(config: WorldConfig) -> np.ndarray:
    """(K, C, M) means each agent's observations are generated around."""
    _, means, viewpoints, _ = _draws(config)
    return means[np.arange(config.num_agents), viewpoints]


def apply_shift(obs: ObservationSet, config: WorldConfig) -> ObservationSet:
    """Regenerate ``obs`` after the environment shift described by ``config.shift``.

    The noise realisation is reused, so a zero shift reproduces ``obs``.
    ``translate`` moves every category mean of agent k by ``magnitude`` along a
    per-agent unit direction. ``permute`` reassigns the true categories of a
    ``magnitude`` fraction of objects by a seeded permutation among them.
    """
    if config.shift is None:
        raise ValueError("config has no shift spec")
    truth, means, viewpoints, noise = _draws(config)
    if obs.observations.shape != noise.shape:
        raise ValueError("observation set does not match the world config")
    spec = config.shift
    rng = derive_rng(config.seed, SHIFT)
    direction = rng.standard_normal((config.num_agents, config.feature_dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    order = rng.permutation(config.num_objects)
    if spec.kind == "translate":
        means = means + spec.magnitude * direction[:, None, None, :]
    else:
        n_moved = int(round(spec.magnitude * config.num_objects))
        moved = order[:n_moved]
        perm = rng.permutation(n_moved)
        truth = truth.copy()
        truth[moved] = truth[moved][perm]
    return _emit(config, truth, means, viewpoints, noise)


def save_observations(obs: ObservationSet, path) -> None:
    m = obs.feature_dim
    header = ["agent_id", "object_id", "context"] + [f"f_{i + 1}" for i in range(m)]
    if obs.ground_truth is not None:
        header.append("true_label")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(obs.num_agents):
            for d in range(obs.num_objects):
                row = [str(k), str(d), str(int(obs.contexts[k, d]))]
                row += [repr(float(x)) for x in obs.observations[k, d]]
                if obs.ground_truth is not None:
                    row.append(str(int(obs.ground_truth[d])))
                writer.writerow(row)


def load_observations(path) -> ObservationSet:
    """Parse an observation file (see ``save_observations`` for the layout)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ObservationFormatError("empty file", 1)
    header = [h.strip() for h in rows[0]]
    if header[:3] != ["agent_id", "object_id", "context"]:
        raise ObservationFormatError("header must start with agent_id, object_id, context", 1)
    has_label = header[-1] == "true_label"
    feature_cols = header[3:-1] if has_label else header[3:]
    if not feature_cols:
        raise ObservationFormatError("no feature columns", 1)
    m = len(feature_cols)
    width = len(header)

    records = {}
    labels = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != width:
            raise ObservationFormatError(f"expected {width} fields, got {len(row)}", lineno)
        try:
            k = int(row[0])
            d = int(row[1])
            ctx = int(row[2])
            feats = [float(x) for x in row[3 : 3 + m]]
            label = int(row[-1]) if has_label else None
        except ValueError as exc:
            raise ObservationFormatError(str(exc), lineno) from None
        if k < 0 or d < 0:
            raise ObservationFormatError("negative agent or object id", lineno)
        if not all(math.isfinite(x) for x in feats):
            raise ObservationFormatError("non-finite feature value", lineno)
        if (k, d) in records:
            raise ObservationFormatError(f"duplicate row for agent {k}, object {d}", lineno)
        records[(k, d)] = (ctx, feats)
        if has_label:
            if d in labels and labels[d] != label:
                raise ObservationFormatError(f"conflicting true_label for object {d}", lineno)
            labels[d] = label

    if not records:
        raise ObservationFormatError("no data rows")
    num_k = max(k for k, _ in records) + 1
    num_d = max(d for _, d in records) + 1
    if len(records) != num_k * num_d:
        missing = [(k, d) for k in range(num_k) for d in range(num_d) if (k, d) not in records]
        raise ValueError(f"missing rows for (agent, object) pairs, e.g. {missing[0]}")
    obs = np.empty((num_k, num_d, m))
    ctx = np.empty((num_k, num_d), dtype=np.int64)
    for (k, d), (c, feats) in records.items():
        obs[k, d] = feats
        ctx[k, d] = c
    truth = np.array([labels[d] for d in range(num_d)], dtype=np.int64) if has_label else None
    return ObservationSet(obs, ctx, truth)


def with_seed(config: WorldConfig, seed: int) -> WorldConfig:
    return replace(config, seed=seed)
