"""A single agent's private generative model and its inference primitives.

Protocol code only ever sees what :func:`propose_sign`,
:func:`acceptance_probability` (or its batched form :func:`acceptance_table`)
and :func:`decide` return; the fields of :class:`AgentState` stay local.

Two modes are supported for the sign-facing primitives:

``sampled``
    scores a sign by ``log p(z_d | w)`` for the agent's current percept z_d.
``collapsed``
    scores a sign by ``log sum_z p(o_d | theta_z) p(z | w)``, marginalising the
    percept. With parameters held fixed this makes the naming game an exact
    MH sampler of the joint sign posterior.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .probkernels import (
    GaussCatHyper,
    dirichlet_predictive,
    log_gaussian_matrix,
    log_sum_exp,
    normal_gamma_update,
    normalize_log_weights,
    sample_log_weights,
)

MODES = ("sampled", "collapsed")


@dataclass
class AgentState:
    agent_id: int
    assignments: np.ndarray  # (D,) percept index per object
    means: np.ndarray  # (Z, M)
    precisions: np.ndarray  # (Z, M)
    phi_counts: np.ndarray  # (W, Z) sign/percept co-occurrence counts
    hyper: GaussCatHyper
    prior_mean: np.ndarray  # resolved Normal-Gamma prior mean, (M,)
    frozen_language: bool = False
    frozen_parameters: bool = field(default=False)

    @property
    def num_categories(self) -> int:
        return self.means.shape[0]

    @property
    def num_signs(self) -> int:
        return self.phi_counts.shape[0]

    def copy(self) -> "AgentState":
        return replace(
            self,
            assignments=self.assignments.copy(),
            means=self.means.copy(),
            precisions=self.precisions.copy(),
            phi_counts=self.phi_counts.copy(),
            prior_mean=self.prior_mean.copy(),
        )

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "assignments": self.assignments.tolist(),
            "means": self.means.tolist(),
            "precisions": self.precisions.tolist(),
            "phi_counts": self.phi_counts.tolist(),
            "hyper": self.hyper.to_dict(),
            "prior_mean": self.prior_mean.tolist(),
            "frozen_language": self.frozen_language,
            "frozen_parameters": self.frozen_parameters,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentState":
        return cls(
            agent_id=int(d["agent_id"]),
            assignments=np.array(d["assignments"], dtype=np.int64),
            means=np.array(d["means"], dtype=float),
            precisions=np.array(d["precisions"], dtype=float),
            phi_counts=np.array(d["phi_counts"], dtype=np.int64),
            hyper=GaussCatHyper.from_dict(d["hyper"]),
            prior_mean=np.array(d["prior_mean"], dtype=float),
            frozen_language=bool(d["frozen_language"]),
            frozen_parameters=bool(d.get("frozen_parameters", False)),
        )


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _sign_array(signs) -> np.ndarray:
    return np.asarray(getattr(signs, "signs", signs), dtype=np.int64)


def init_agent(k: int, Z: int, hyper: GaussCatHyper, obs: np.ndarray, rng) -> AgentState:
    """Fresh agent for the (D, M) observation block ``obs``.

    Percepts start uniform at random, emission means are scattered around the
    agent's data mean at the data's scale, and the association counts are
    empty so p(z | w) is the symmetric prior.
    """
    if Z < 1:
        raise ValueError("Z must be >= 1")
    obs = np.asarray(obs, dtype=float)
    d, m = obs.shape
    hyper = replace(hyper, num_categories=Z)
    data_mean = obs.mean(axis=0)
    data_std = obs.std(axis=0)
    data_std = np.where(data_std > 0, data_std, 1.0)
    assignments = rng.integers(Z, size=d).astype(np.int64)
    means = data_mean + data_std * rng.standard_normal((Z, m))
    precisions = np.broadcast_to(1.0 / data_std**2, (Z, m)).copy()
    prior_mean = data_mean.copy() if hyper.ng_mean0 is None else np.asarray(hyper.ng_mean0, float)
    if prior_mean.shape != (m,):
        raise ValueError("ng_mean0 length does not match the feature dimension")
    return AgentState(
        agent_id=k,
        assignments=assignments,
        means=means,
        precisions=precisions,
        phi_counts=np.zeros((hyper.num_signs, Z), dtype=np.int64),
        hyper=hyper,
        prior_mean=prior_mean,
    )


def emission_loglik(agent: AgentState, obs: np.ndarray) -> np.ndarray:
    """(D, Z) table of log p(o_d | theta_z)."""
    return log_gaussian_matrix(obs, agent.means, agent.precisions)


def association(agent: AgentState) -> np.ndarray:
    """(W, Z) table of the predictive p(z | w)."""
    return dirichlet_predictive(agent.phi_counts, agent.hyper.dirichlet_alpha)


def perception_log_weights(agent: AgentState, obs: np.ndarray, signs) -> np.ndarray:
    w = _sign_array(signs)
    return emission_loglik(agent, obs) + np.log(association(agent))[w]


def perception_posterior(agent: AgentState, obs: np.ndarray, signs) -> np.ndarray:
    """(D, Z) normalized q(z | o_d, w_d) used by :func:`perceive`."""
    return normalize_log_weights(perception_log_weights(agent, obs, signs))


def likelihood_posterior(agent: AgentState, obs: np.ndarray) -> np.ndarray:
    """(D, Z) q(z | o_d) under a uniform prior over percepts."""
    return normalize_log_weights(emission_loglik(agent, obs))


def perceive(agent: AgentState, obs: np.ndarray, signs, rng) -> np.ndarray:
    """One full sweep resampling every percept; draws D uniforms."""
    lw = perception_log_weights(agent, obs, signs)
    u = rng.random(lw.shape[0])
    agent.assignments = sample_log_weights(lw, u)
    return agent.assignments


def sign_scores(agent: AgentState, obs: np.ndarray, mode: str) -> np.ndarray:
    """(D, W) log score of each sign for each object, before the sign prior."""
    _check_mode(mode)
    log_phi = np.log(association(agent))  # (W, Z)
    if mode == "sampled":
        return log_phi[:, agent.assignments].T.copy()
    ll = emission_loglik(agent, obs)  # (D, Z)
    return log_sum_exp(ll[:, None, :] + log_phi[None, :, :], axis=2)


def proposal_log_weights(agent: AgentState, obs: np.ndarray, mode: str) -> np.ndarray:
    scores = sign_scores(agent, obs, mode)
    return scores - np.log(scores.shape[1])  # uniform p(w)


def proposal_cdf(agent: AgentState, obs: np.ndarray, mode: str) -> np.ndarray:
    return np.cumsum(normalize_log_weights(proposal_log_weights(agent, obs, mode)), axis=1)


def propose_sign(agent: AgentState, d: int, mode: str, obs: np.ndarray, rng) -> int:
    """Speaker's proposal for object ``d``; consumes one uniform."""
    lw = proposal_log_weights(agent, obs, mode)[d]
    return int(sample_log_weights(lw[None, :], np.array([rng.random()]))[0])


def _acceptance_from_scores(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(invalid="ignore"):
        diff = num - den
    r = np.exp(np.minimum(diff, 0.0))
    # p(den) == 0: accept whatever is proposed (also covers 0/0)
    return np.where(np.isneginf(den), 1.0, r)


def acceptance_table(listener: AgentState, obs: np.ndarray, mode: str) -> np.ndarray:
    """(D, W, W) array ``acc[d, proposed, current]`` of MH acceptance probabilities."""
    s = sign_scores(listener, obs, mode)
    return np.ascontiguousarray(_acceptance_from_scores(s[:, :, None], s[:, None, :]))


def acceptance_probability(
    listener: AgentState, d: int, w_star: int, w_current: int, mode: str, obs: np.ndarray
) -> float:
    """min(1, L(w_star) / L(w_current)) from the listener's own model only."""
    w = listener.num_signs
    if not (0 <= w_star < w and 0 <= w_current < w):
        raise ValueError("sign index out of range")
    if w_star == w_current:
        return 1.0
    s = sign_scores(listener, obs, mode)[d]
    return float(_acceptance_from_scores(s[w_star], s[w_current]))


def decide(listener: AgentState, r: float, rng) -> bool:
    """Accept with probability ``r``; a frozen-language listener always rejects.

    Always consumes one uniform so frozen and plastic runs share a stream.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError("acceptance probability must lie in [0, 1]")
    u = rng.random()
    return (not listener.frozen_language) and u < r


def update_parameters(agent: AgentState, obs: np.ndarray, signs) -> None:
    """Refit emissions from current percepts; recount sign associations unless frozen."""
    if agent.frozen_parameters:
        return
    h = agent.hyper
    if h.ng_mean0 is None:
        # empirical-Bayes prior: empty categories park at the current data centre
        agent.prior_mean = obs.mean(axis=0)
    for z in range(agent.num_categories):
        post = normal_gamma_update(
            agent.prior_mean, h.ng_kappa0, h.ng_a0, h.ng_b0, obs[agent.assignments == z]
        )
        agent.means[z] = post.mean
        agent.precisions[z] = post.a / post.b
    if not agent.frozen_language:
        counts = np.zeros_like(agent.phi_counts)
        np.add.at(counts, (_sign_array(signs), agent.assignments), 1)
        agent.phi_counts = counts


def map_sign_estimates(agent: AgentState, mode: str, obs: np.ndarray) -> np.ndarray:
    """Best sign per object (lowest index on ties); uses no randomness."""
    return np.argmax(proposal_log_weights(agent, obs, mode), axis=1)


def map_sign_estimate(agent: AgentState, d: int, mode: str, obs: np.ndarray) -> int:
    return int(map_sign_estimates(agent, mode, obs)[d])
