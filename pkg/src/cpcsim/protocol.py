"""The naming game: pairing, propose/accept rounds and the public transcript.

The only shared state is :class:`SignAssignment`, one sign per object. The
only thing that crosses between agents is a transcript event: who spoke to
whom, about which object, which sign was proposed, and whether it was taken.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import jsonschema
import numpy as np

from . import agent as ag
from . import kernels
from .freeenergy import FreeEnergyReport, estimate_total
from .world import ObservationSet

VARIANTS = {"mh": kernels.MH, "always": kernels.ALWAYS, "never": kernels.NEVER}

TRANSCRIPT_HEADER_SCHEMA = {
    "type": "object",
    "properties": {
        "rng_seed": {"type": "integer"},
        "num_signs": {"type": "integer", "minimum": 1},
        "initial_signs": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
    "required": ["rng_seed", "num_signs", "initial_signs"],
    "additionalProperties": False,
}

TRANSCRIPT_EVENT_SCHEMA = {
    "type": "object",
    "properties": {
        "round": {"type": "integer", "minimum": 0},
        "speaker": {"type": "integer", "minimum": 0},
        "listener": {"type": "integer", "minimum": 0},
        "object": {"type": "integer", "minimum": 0},
        "proposed": {"type": "integer", "minimum": 0},
        "accepted": {"type": "integer", "enum": [0, 1]},
    },
    "required": ["round", "speaker", "listener", "object", "proposed", "accepted"],
    "additionalProperties": False,
}


class SignAssignment:
    """Shared sign per object; ``version`` counts committed acceptances."""

    def __init__(self, signs, num_signs: int, version: int = 0):
        self.signs = np.array(signs, dtype=np.int64)
        self.num_signs = int(num_signs)
        self.version = int(version)
        if self.signs.ndim != 1:
            raise ValueError("signs must be a vector")
        if np.any((self.signs < 0) | (self.signs >= self.num_signs)):
            raise ValueError("sign index out of range")

    @classmethod
    def random(cls, num_objects: int, num_signs: int, rng) -> "SignAssignment":
        return cls(rng.integers(num_signs, size=num_objects), num_signs)

    def __len__(self):
        return self.signs.shape[0]

    def commit(self, d: int, w: int) -> None:
        if not 0 <= w < self.num_signs:
            raise ValueError("sign index out of range")
        self.signs[d] = w
        self.version += 1

    def copy(self) -> "SignAssignment":
        return SignAssignment(self.signs.copy(), self.num_signs, self.version)

    def __eq__(self, other):
        return (
            isinstance(other, SignAssignment)
            and self.num_signs == other.num_signs
            and np.array_equal(self.signs, other.signs)
        )

    def __repr__(self):
        return f"SignAssignment({self.signs.tolist()}, W={self.num_signs}, v{self.version})"


class TranscriptEvent(NamedTuple):
    round: int
    speaker: int
    listener: int
    object: int
    proposed: int
    accepted: bool

    def to_record(self) -> dict:
        return {
            "round": int(self.round),
            "speaker": int(self.speaker),
            "listener": int(self.listener),
            "object": int(self.object),
            "proposed": int(self.proposed),
            "accepted": int(bool(self.accepted)),
        }


@dataclass
class GameTranscript:
    rng_seed: int
    num_signs: int
    initial_signs: np.ndarray
    events: list = field(default_factory=list)

    def header(self) -> dict:
        return {
            "rng_seed": int(self.rng_seed),
            "num_signs": int(self.num_signs),
            "initial_signs": [int(s) for s in self.initial_signs],
        }

    def replay(self) -> SignAssignment:
        signs = SignAssignment(self.initial_signs, self.num_signs)
        for ev in self.events:
            if ev.accepted:
                signs.commit(ev.object, ev.proposed)
        return signs

    def write(self, path) -> None:
        with TranscriptWriter(path, self.header()) as w:
            w.extend(self.events)

    @classmethod
    def read(cls, path, validate: bool = True) -> "GameTranscript":
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty transcript")
        header = json.loads(lines[0])
        if validate:
            jsonschema.validate(header, TRANSCRIPT_HEADER_SCHEMA)
        events = []
        for ln in lines[1:]:
            rec = json.loads(ln)
            if validate:
                jsonschema.validate(rec, TRANSCRIPT_EVENT_SCHEMA)
            events.append(
                TranscriptEvent(
                    rec["round"], rec["speaker"], rec["listener"],
                    rec["object"], rec["proposed"], bool(rec["accepted"]),
                )
            )
        return cls(header["rng_seed"], header["num_signs"],
                   np.array(header["initial_signs"], dtype=np.int64), events)


class TranscriptWriter:
    """Appends transcript lines as rounds complete."""

    def __init__(self, path, header: dict, append: bool = False):
        self.path = path
        self._fh = open(path, "a" if append else "w", encoding="utf-8")
        if not append:
            self._fh.write(json.dumps(header, separators=(",", ":")) + "\n")

    def extend(self, events: Iterable[TranscriptEvent]) -> None:
        for ev in events:
            self._fh.write(json.dumps(ev.to_record(), separators=(",", ":")) + "\n")

    def flush(self):
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def pairing_schedule(K: int, round: int, rng) -> list[tuple[int, int]]:
    """(speaker, listener) pairs for one round.

    Two agents alternate roles; larger groups get a random matching, with one
    agent sitting out when K is odd.
    """
    if K < 2:
        raise ValueError("need at least two agents")
    if K == 2:
        return [(0, 1)] if round % 2 == 0 else [(1, 0)]
    order = rng.permutation(K)
    return [(int(order[i]), int(order[i + 1])) for i in range(0, K - 1, 2)]


def _obs_block(obs, k):
    return obs.observations[k] if isinstance(obs, ObservationSet) else obs[k]


def run_round(agents, signs: SignAssignment, obs, variant: str, mode: str, round: int, rng):
    """Play every scheduled pair over every object; mutates ``signs``.

    Each object costs two uniforms (proposal, decision) whatever the variant,
    so runs that differ only in variant share their random stream.
    """
    code = VARIANTS[variant]
    d = len(signs)
    events = []
    for sp, li in pairing_schedule(len(agents), round, rng):
        speaker, listener = agents[sp], agents[li]
        cdf = ag.proposal_cdf(speaker, _obs_block(obs, sp), mode)
        u = rng.random((d, 2))
        pair_code = kernels.NEVER if listener.frozen_language else code
        if pair_code == kernels.MH:
            acc = ag.acceptance_table(listener, _obs_block(obs, li), mode)
        else:
            acc = np.ones((d, 1, 1))
        new, proposals, accepted = kernels.naming_sweep(
            np.ascontiguousarray(cdf), np.ascontiguousarray(acc), signs.signs, u, pair_code
        )
        signs.signs = new
        signs.version += int(accepted.sum())
        events.extend(
            TranscriptEvent(round, sp, li, j, int(proposals[j]), bool(accepted[j]))
            for j in range(d)
        )
    return signs, events


@dataclass
class TrainingSchedule:
    rounds: int
    variant: str = "mh"
    mode: str = "sampled"
    freeze_after: int | None = None
    shift_at: int | None = None
    shifted_obs: ObservationSet | None = None

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown protocol variant {self.variant!r}")
        if self.mode not in ag.MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.shift_at is not None and self.shifted_obs is None:
            raise ValueError("shift_at needs shifted_obs")


@dataclass
class TrainingState:
    """Everything a run needs to continue from the start of ``round``."""

    agents: list
    signs: SignAssignment
    obs: ObservationSet
    rng: np.random.Generator
    agent_rngs: list
    round: int = 0


def training_round(state: TrainingState, schedule: TrainingSchedule):
    """Advance ``state`` by one round; returns (events, FreeEnergyReport)."""
    r = state.round
    if schedule.shift_at is not None and r == schedule.shift_at:
        state.obs = schedule.shifted_obs
    if schedule.freeze_after is not None and r >= schedule.freeze_after:
        for a in state.agents:
            a.frozen_language = True
    obs = state.obs
    for k, a in enumerate(state.agents):
        ag.perceive(a, obs.observations[k], state.signs, state.agent_rngs[k])
    _, events = run_round(
        state.agents, state.signs, obs, schedule.variant, schedule.mode, r, state.rng
    )
    for k, a in enumerate(state.agents):
        ag.update_parameters(a, obs.observations[k], state.signs)
    report = estimate_total(state.agents, state.signs, obs, r)
    state.round = r + 1
    return events, report


@dataclass
class TrainingResult:
    agents: list
    signs: SignAssignment
    transcript: GameTranscript
    reports: list[FreeEnergyReport]


def run_training(
    agents,
    signs: SignAssignment,
    obs: ObservationSet,
    schedule: TrainingSchedule,
    rng,
    agent_rngs=None,
    rng_seed: int = 0,
    on_round: Callable | None = None,
) -> TrainingResult:
    """Perceive, play, learn and score, ``schedule.rounds`` times.

    ``agent_rngs`` gives each agent its own perception stream; by default all
    agents draw from ``rng``. ``on_round(state, events, report)`` is called
    after every round.
    """
    state = TrainingState(
        agents, signs, obs, rng, agent_rngs or [rng] * len(agents), round=0
    )
    transcript = GameTranscript(rng_seed, signs.num_signs, signs.signs.copy())
    reports = []
    while state.round < schedule.rounds:
        events, report = training_round(state, schedule)
        transcript.events.extend(events)
        reports.append(report)
        if on_round is not None:
            on_round(state, events, report)
    return TrainingResult(state.agents, state.signs, transcript, reports)


def run_fixed_chain(agents, signs: SignAssignment, obs, rounds: int, mode: str, rng):
    """MH naming game with every agent's parameters and percepts held fixed.

    Returns the (rounds, D) chain of sign assignments after each round.
    ``signs`` is advanced in place. Two agents use the compiled chain kernel;
    larger groups fall back to :func:`run_round`, which draws the same stream.
    """
    K = len(agents)
    d = len(signs)
    if K == 2:
        cdf = np.stack([ag.proposal_cdf(a, _obs_block(obs, k), mode) for k, a in enumerate(agents)])
        acc = np.stack([ag.acceptance_table(a, _obs_block(obs, k), mode) for k, a in enumerate(agents)])
        if any(a.frozen_language for a in agents):
            raise ValueError("fixed chain expects plastic listeners")
        u = rng.random((rounds, d, 2))
        speakers = (np.arange(rounds) % 2).astype(np.int64)
        listeners = 1 - speakers
        chain, n_acc = kernels.mh_chain(
            np.ascontiguousarray(cdf), np.ascontiguousarray(acc), signs.signs, u,
            speakers, listeners,
        )
        if rounds:
            signs.signs = chain[-1].copy()
        signs.version += int(n_acc)
        return chain
    chain = np.empty((rounds, d), dtype=np.int64)
    for r in range(rounds):
        run_round(agents, signs, obs, "mh", mode, r, rng)
        chain[r] = signs.signs
    return chain
