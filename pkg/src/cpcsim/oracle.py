"""Exact and centralized references for the decentralized naming game.

Everything here is computed straight from the model definition (Gaussian
log-densities and Dirichlet predictives), never through the agent's scoring
code, so it can be used to check that code.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .probkernels import dirichlet_predictive, log_gaussian_diag, log_sum_exp

MAX_OBJECTS, MAX_AGENTS, MAX_SIGNS, MAX_CATEGORIES, MAX_JOINT = 4, 3, 4, 4, 256
BURN_IN_FRACTION = 0.2


@dataclass
class TinyInstance:
    """A small fixed-parameter problem whose sign posterior can be enumerated.

    ``agents`` are :class:`~cpcsim.agent.AgentState` objects; they are marked
    ``frozen_parameters`` on construction. ``observations`` is (K, D, M).
    """

    agents: list
    observations: np.ndarray

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=float)
        for a in self.agents:
            a.frozen_parameters = True
        k, d, _ = self.observations.shape
        w = self.num_signs
        z = max(a.num_categories for a in self.agents)
        if len(self.agents) != k:
            raise ValueError("one agent per observation block required")
        if any(a.num_signs != w for a in self.agents):
            raise ValueError("agents disagree on the number of signs")
        if (
            d > MAX_OBJECTS or k > MAX_AGENTS or w > MAX_SIGNS
            or z > MAX_CATEGORIES or w**d > MAX_JOINT
        ):
            raise ValueError(
                f"instance too large to enumerate (D={d}, K={k}, W={w}, Z={z})"
            )

    @property
    def num_signs(self) -> int:
        return self.agents[0].num_signs

    @property
    def num_objects(self) -> int:
        return self.observations.shape[1]


@dataclass
class PosteriorTable:
    per_object: np.ndarray  # (D, W)
    joint: np.ndarray  # (W**D,), lexicographic over assignments
    assignments: list

    def index_of(self, signs) -> int:
        return joint_index(signs, self.per_object.shape[1])


def joint_index(signs, num_signs: int) -> int:
    idx = 0
    for s in signs:
        idx = idx * num_signs + int(s)
    return idx


def _object_log_likelihood(inst: TinyInstance, d: int, w: int) -> float:
    """log prod_k sum_z p(o^k_d | theta^k_z) p_k(z | w)."""
    total = 0.0
    for k, a in enumerate(inst.agents):
        phi = dirichlet_predictive(a.phi_counts[w], a.hyper.dirichlet_alpha)
        terms = [
            log_gaussian_diag(inst.observations[k, d], a.means[z], a.precisions[z])
            + np.log(phi[z])
            for z in range(a.num_categories)
        ]
        total += log_sum_exp(np.array(terms))
    return total


def enumerate_posterior(inst: TinyInstance) -> PosteriorTable:
    """Exact p(w | all observations) over every joint sign assignment."""
    w_count, d_count = inst.num_signs, inst.num_objects
    log_prior = -np.log(w_count)
    obj_ll = np.array(
        [[_object_log_likelihood(inst, d, w) for w in range(w_count)] for d in range(d_count)]
    )
    assignments = list(itertools.product(range(w_count), repeat=d_count))
    log_joint = np.array(
        [sum(log_prior + obj_ll[d, w] for d, w in enumerate(ws)) for ws in assignments]
    )
    joint = np.exp(log_joint - log_sum_exp(log_joint))
    per_object = np.exp(obj_ll - log_sum_exp(obj_ll, axis=1)[:, None])
    return PosteriorTable(per_object, joint, assignments)


def centralized_gibbs(inst: TinyInstance, iterations: int, rng) -> np.ndarray:
    """Single-site Gibbs sweeps over the signs; returns post-burn-in samples.

    The first ``BURN_IN_FRACTION`` of the sweeps are discarded, no thinning.
    """
    table = enumerate_posterior(inst)
    d_count = inst.num_objects
    cdf = np.cumsum(table.per_object, axis=1)
    u = rng.random((iterations, d_count))
    chain = np.empty((iterations, d_count), dtype=np.int64)
    for d in range(d_count):
        # per-object conditionals do not depend on the other sites here
        rows = np.ascontiguousarray(np.broadcast_to(cdf[d], (iterations, cdf.shape[1])))
        chain[:, d] = kernels.sample_rows(rows, np.ascontiguousarray(u[:, d]))
    burn = int(BURN_IN_FRACTION * iterations)
    return chain[burn:]


def empirical_joint(chain: np.ndarray, num_signs: int) -> np.ndarray:
    chain = np.asarray(chain, dtype=np.int64)
    d_count = chain.shape[1]
    weights = num_signs ** np.arange(d_count - 1, -1, -1)
    idx = chain @ weights
    counts = np.bincount(idx, minlength=num_signs**d_count)
    return counts / counts.sum()


def total_variation_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"support mismatch: {p.shape} vs {q.shape}")
    for name, t in (("p", p), ("q", q)):
        if abs(t.sum() - 1.0) > 1e-9 or np.any(t < 0):
            raise ValueError(f"{name} is not a normalized probability table")
    return float(0.5 * np.abs(p - q).sum())


def standard_tiny_instance() -> TinyInstance:
    """K=2, D=2, W=2, Z=2 instance with hand-set, deliberately lopsided parameters."""
    from .agent import AgentState
    from .probkernels import GaussCatHyper

    hyper = GaussCatHyper(num_signs=2, num_categories=2)

    def make(k, means, precs, counts):
        return AgentState(
            agent_id=k,
            assignments=np.zeros(2, dtype=np.int64),
            means=np.array(means, dtype=float),
            precisions=np.array(precs, dtype=float),
            phi_counts=np.array(counts, dtype=np.int64),
            hyper=hyper,
            prior_mean=np.zeros(1),
        )

    agents = [
        make(0, [[-1.0], [1.0]], [[1.0], [1.0]], [[3, 1], [1, 3]]),
        make(1, [[0.0], [2.0]], [[2.0], [2.0]], [[1, 4], [2, 1]]),
    ]
    observations = np.array([[[-0.5], [0.8]], [[1.5], [0.3]]])
    return TinyInstance(agents, observations)
