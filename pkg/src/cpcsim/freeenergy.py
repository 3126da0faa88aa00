"""Plug-in evaluation of the collective free energy, term by term.

    F = KL[q(w | {z^k}) || p(w)]
        + sum_k ( E_q[-log p(o^k | z^k)] + KL[q(z^k | o^k) || p(z^k | w)] )

The observation-entropy constant is dropped, so totals are only comparable
within one dataset.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import agent as ag
from .probkernels import kl_categorical


@dataclass(frozen=True)
class FreeEnergyReport:
    collective_regularization: float
    individual_prediction_error: tuple[float, ...]
    individual_regularization: tuple[float, ...]
    total: float
    round: int = 0

    def to_record(self) -> dict:
        return {
            "type": "free_energy",
            "round": int(self.round),
            "collective_regularization": self.collective_regularization,
            "individual_prediction_error": list(self.individual_prediction_error),
            "individual_regularization": list(self.individual_regularization),
            "total": self.total,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "FreeEnergyReport":
        return cls(
            rec["collective_regularization"],
            tuple(rec["individual_prediction_error"]),
            tuple(rec["individual_regularization"]),
            rec["total"],
            rec["round"],
        )


def _signs(signs):
    return np.asarray(getattr(signs, "signs", signs), dtype=np.int64)


def _obs(obs, k):
    return obs.observations[k] if hasattr(obs, "observations") else obs[k]


def sign_posterior(agents, num_objects: int) -> np.ndarray:
    """(D, W) q_d(w) proportional to p(w) prod_k p_k(z^k_d | w), uniform p(w)."""
    w = agents[0].num_signs
    log_q = np.zeros((num_objects, w))
    for a in agents:
        log_q += np.log(ag.association(a))[:, a.assignments].T
    log_q -= log_q.max(axis=1, keepdims=True)
    q = np.exp(log_q)
    return q / q.sum(axis=1, keepdims=True)


def collective_regularization(agents, signs, obs) -> float:
    d = len(_signs(signs))
    q = sign_posterior(agents, d)
    prior = np.full(q.shape[1], 1.0 / q.shape[1])
    return float(np.sum(kl_categorical(q, prior[None, :])))


def individual_prediction_error(agent, obs, signs=None) -> float:
    """Expected negative log-likelihood under the perception posterior.

    ``obs`` is the agent's own (D, M) block. Without ``signs`` the posterior is
    the likelihood-only one.
    """
    ll = ag.emission_loglik(agent, obs)
    if signs is None:
        q = ag.likelihood_posterior(agent, obs)
    else:
        q = ag.perception_posterior(agent, obs, signs)
    return float(np.sum(q * -ll))


def individual_regularization(agent, signs, obs) -> float:
    q = ag.likelihood_posterior(agent, obs)
    prior = ag.association(agent)[_signs(signs)]
    return float(np.sum(kl_categorical(q, prior)))


def estimate_total(agents, signs, obs, round: int = 0) -> FreeEnergyReport:
    collective = collective_regularization(agents, signs, obs)
    pred = tuple(
        individual_prediction_error(a, _obs(obs, k), signs) for k, a in enumerate(agents)
    )
    reg = tuple(individual_regularization(a, signs, _obs(obs, k)) for k, a in enumerate(agents))
    total = collective + sum(p + r for p, r in zip(pred, reg))
    return FreeEnergyReport(collective, pred, reg, float(total), int(round))
