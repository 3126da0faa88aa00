"""Seeded runs, artifacts on disk, checkpoints and resume.

Per seed the output directory holds::

    seed_<s>/config.yaml       the experiment config
    seed_<s>/transcript.jsonl  header line, then one naming-game event per line
    seed_<s>/metrics.jsonl     per round: one free_energy and one metrics record
    seed_<s>/checkpoint.json   full resumable state after the last round run
    seed_<s>/manifest.json     versions, seed, sha256 of the files above

All random streams derive from the seed (see :mod:`cpcsim.seeding`), so the
only bytes that differ between reruns are the manifest timestamps.
"""
from __future__ import annotations

import hashlib
import json
import logging
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import agent as ag
from . import metrics as mt
from .config import ExperimentConfig, config_from_dict, emit_config
from .freeenergy import FreeEnergyReport
from .protocol import (
    SignAssignment,
    TrainingSchedule,
    TrainingState,
    TranscriptWriter,
    training_round,
)
from .seeding import PROTOCOL, agent_rng, derive_rng
from .world import apply_shift, generate_world

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
PACKAGE_VERSION = "0.1.0"

CONFIG_FILE = "config.yaml"
TRANSCRIPT_FILE = "transcript.jsonl"
METRICS_FILE = "metrics.jsonl"
CHECKPOINT_FILE = "checkpoint.json"
MANIFEST_FILE = "manifest.json"


class CheckpointCorruptError(RuntimeError):
    pass


class CheckpointVersionError(RuntimeError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _rng_state(rng) -> dict:
    return rng.bit_generator.state


def _rng_from_state(state: dict) -> np.random.Generator:
    bitgen = getattr(np.random, state["bit_generator"])()
    bitgen.state = state
    return np.random.Generator(bitgen)


class Simulation:
    """One seed of one experiment, advanced a round at a time."""

    def __init__(self, config: ExperimentConfig, seed: int, _restore: dict | None = None):
        self.config = config
        self.seed = int(seed)
        world_cfg = config.world_for_seed(self.seed)
        self.base_obs = generate_world(world_cfg)
        self.shifted_obs = apply_shift(self.base_obs, world_cfg) if world_cfg.shift else None
        self.schedule = TrainingSchedule(
            rounds=config.rounds,
            variant=config.protocol_variant,
            mode=config.mode,
            freeze_after=config.freeze_after,
            shift_at=config.shift_at,
            shifted_obs=self.shifted_obs,
        )
        if _restore is None:
            agent_rngs = [agent_rng(self.seed, k) for k in range(world_cfg.num_agents)]
            agents = [
                ag.init_agent(k, config.num_categories, config.hyper,
                              self.base_obs.observations[k], agent_rngs[k])
                for k in range(world_cfg.num_agents)
            ]
            rng = derive_rng(self.seed, PROTOCOL)
            signs = SignAssignment.random(world_cfg.num_objects, config.num_signs, rng)
            self.initial_signs = signs.signs.copy()
            self.state = TrainingState(agents, signs, self.base_obs, rng, agent_rngs, 0)
        else:
            r = int(_restore["round"])
            shifted = config.shift_at is not None and r > config.shift_at
            self.initial_signs = np.array(_restore["initial_signs"], dtype=np.int64)
            self.state = TrainingState(
                agents=[ag.AgentState.from_dict(a) for a in _restore["agents"]],
                signs=SignAssignment(_restore["signs"], config.num_signs, _restore["sign_version"]),
                obs=self.shifted_obs if shifted else self.base_obs,
                rng=_rng_from_state(_restore["rng"]),
                agent_rngs=[_rng_from_state(s) for s in _restore["agent_rngs"]],
                round=r,
            )

    @property
    def round(self) -> int:
        return self.state.round

    @property
    def done(self) -> bool:
        return self.state.round >= self.config.rounds

    def metric_record(self, report: FreeEnergyReport) -> mt.MetricRecord:
        st = self.state
        mode = self.config.mode
        estimates = [
            ag.map_sign_estimates(a, mode, st.obs.observations[k]) for k, a in enumerate(st.agents)
        ]
        truth = st.obs.ground_truth
        if truth is None:
            ari_signs, ari_z = None, None
        else:
            ari_signs = mt.adjusted_rand_index(st.signs.signs, truth)
            ari_z = tuple(mt.adjusted_rand_index(a.assignments, truth) for a in st.agents)
        return mt.MetricRecord(
            round=report.round,
            kappa=mt.agreement_kappa(estimates),
            ari_signs_vs_truth=ari_signs,
            ari_z_vs_truth=ari_z,
            free_energy_total=report.total,
        )

    def step(self):
        """Run one round; returns (events, FreeEnergyReport, MetricRecord)."""
        events, report = training_round(self.state, self.schedule)
        return events, report, self.metric_record(report)

    def run(self, until: int | None = None):
        """Run in memory; returns (MetricSeries, list of FreeEnergyReport)."""
        until = self.config.rounds if until is None else min(until, self.config.rounds)
        series, reports = mt.MetricSeries(), []
        while self.state.round < until:
            _, report, rec = self.step()
            reports.append(report)
            series.append(rec)
        return series, reports

    def checkpoint(self) -> dict:
        st = self.state
        return {
            "format_version": FORMAT_VERSION,
            "package_version": PACKAGE_VERSION,
            "config": self.config.to_dict(),
            "seed": self.seed,
            "round": st.round,
            "initial_signs": self.initial_signs.tolist(),
            "signs": st.signs.signs.tolist(),
            "sign_version": st.signs.version,
            "agents": [a.to_dict() for a in st.agents],
            "rng": _rng_state(st.rng),
            "agent_rngs": [_rng_state(r) for r in st.agent_rngs],
        }

    def checkpoint_bytes(self) -> bytes:
        return (_dumps(self.checkpoint()) + "\n").encode("utf-8")

    @classmethod
    def from_checkpoint(cls, data: dict) -> "Simulation":
        if data.get("format_version") != FORMAT_VERSION:
            raise CheckpointVersionError(
                f"checkpoint format version {data.get('format_version')!r} "
                f"is not supported (expected {FORMAT_VERSION})"
            )
        config = config_from_dict(data["config"])
        return cls(config, data["seed"], _restore=data)


@dataclass
class RunArtifact:
    seed: int
    directory: Path
    status: str = "ok"
    error: str | None = None
    final: dict = field(default_factory=dict)

    @property
    def config_path(self) -> Path:
        return self.directory / CONFIG_FILE

    @property
    def transcript_path(self) -> Path:
        return self.directory / TRANSCRIPT_FILE

    @property
    def metrics_path(self) -> Path:
        return self.directory / METRICS_FILE

    @property
    def checkpoint_path(self) -> Path:
        return self.directory / CHECKPOINT_FILE

    @property
    def manifest_path(self) -> Path:
        return self.directory / MANIFEST_FILE


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(art: RunArtifact, round_done: int) -> None:
    files = [CONFIG_FILE, TRANSCRIPT_FILE, METRICS_FILE, CHECKPOINT_FILE]
    manifest = {
        "format_version": FORMAT_VERSION,
        "package_version": PACKAGE_VERSION,
        "seed": art.seed,
        "rounds_completed": round_done,
        "digests": {name: _sha256(art.directory / name) for name in files},
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    art.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _final_summary(rec: mt.MetricRecord | None) -> dict:
    if rec is None:
        return {}
    return {
        "round": rec.round,
        "kappa": rec.kappa,
        "ari_signs_vs_truth": rec.ari_signs_vs_truth,
        "ari_z_mean": rec.ari_z_mean,
        "free_energy_total": rec.free_energy_total,
    }


def _drive(sim: Simulation, art: RunArtifact, stop_at: int | None, append: bool) -> None:
    header = {
        "rng_seed": sim.seed,
        "num_signs": sim.config.num_signs,
        "initial_signs": sim.initial_signs.tolist(),
    }
    until = sim.config.rounds if stop_at is None else min(stop_at, sim.config.rounds)
    last = None
    with TranscriptWriter(art.transcript_path, header, append=append) as tw, open(
        art.metrics_path, "a" if append else "w", encoding="utf-8"
    ) as mfh:
        while sim.round < until:
            events, report, rec = sim.step()
            tw.extend(events)
            mfh.write(_dumps(report.to_record()) + "\n")
            mfh.write(_dumps(rec.to_record()) + "\n")
            last = rec
    art.checkpoint_path.write_bytes(sim.checkpoint_bytes())
    _write_manifest(art, sim.round)
    art.final = _final_summary(last) or art.final


def run_seed(config: ExperimentConfig, seed: int, out_dir, stop_at: int | None = None) -> RunArtifact:
    """Run one seed from scratch into ``out_dir/seed_<seed>``."""
    art = RunArtifact(int(seed), Path(out_dir) / f"seed_{seed}")
    art.directory.mkdir(parents=True, exist_ok=True)
    art.config_path.write_text(emit_config(config), encoding="utf-8")
    sim = Simulation(config, seed)
    _drive(sim, art, stop_at, append=False)
    return art


def verify_manifest(directory) -> dict:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / MANIFEST_FILE).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"unreadable manifest in {directory}: {exc}") from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"run was written with format version {manifest.get('format_version')!r}, "
            f"this build reads version {FORMAT_VERSION}"
        )
    for name, digest in manifest["digests"].items():
        path = directory / name
        if not path.exists() or _sha256(path) != digest:
            raise CheckpointCorruptError(f"{path}: content digest does not match the manifest")
    return manifest


def checkpoint_restore(artifact) -> Simulation:
    """Rebuild a resumable :class:`Simulation` from a run directory or artifact."""
    directory = Path(getattr(artifact, "directory", artifact))
    verify_manifest(directory)
    try:
        data = json.loads((directory / CHECKPOINT_FILE).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointCorruptError(f"checkpoint is not valid JSON: {exc}") from None
    return Simulation.from_checkpoint(data)


def resume_seed(directory, stop_at: int | None = None) -> RunArtifact:
    """Continue a checkpointed run in place, appending to its streams."""
    sim = checkpoint_restore(directory)
    art = RunArtifact(sim.seed, Path(directory))
    _drive(sim, art, stop_at, append=True)
    return art


def _check_writable(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out_dir} is not writable: {exc}") from exc


def _aggregate(values) -> dict:
    vals = np.array([v for v in values if v is not None], dtype=float)
    if vals.size == 0:
        return {"median": None, "iqr": None, "n": 0}
    q1, med, q3 = np.percentile(vals, [25, 50, 75])
    return {"median": float(med), "iqr": [float(q1), float(q3)], "n": int(vals.size)}


def run_experiment(config: ExperimentConfig, out_dir=None, seeds=None, workers: int = 1):
    """Run every seed; a failing seed is recorded and the others still finish.

    Returns the list of :class:`RunArtifact` and writes ``summary.json``.
    """
    out = Path(out_dir or config.output_dir)
    _check_writable(out)
    seeds = list(config.seeds if seeds is None else seeds)
    artifacts = []
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {s: pool.submit(_safe_run_seed, config, s, out) for s in seeds}
            artifacts = [futures[s].result() for s in seeds]
    else:
        artifacts = [_safe_run_seed(config, s, out) for s in seeds]

    ok = [a for a in artifacts if a.status == "ok"]
    summary = {
        "seeds": [a.seed for a in artifacts],
        "per_seed": {str(a.seed): a.final for a in ok},
        "failures": [{"seed": a.seed, "error": a.error} for a in artifacts if a.status != "ok"],
        "aggregate": {
            key: _aggregate([a.final.get(key) for a in ok])
            for key in ("kappa", "ari_signs_vs_truth", "ari_z_mean", "free_energy_total")
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return artifacts


def _safe_run_seed(config, seed, out) -> RunArtifact:
    try:
        return run_seed(config, seed, out)
    except Exception as exc:  # isolate per-seed failures
        log.error("seed %s failed: %s", seed, exc)
        return RunArtifact(
            int(seed), Path(out) / f"seed_{seed}", status="failed",
            error="".join(traceback.format_exception_only(type(exc), exc)).strip(),
        )


def read_metrics(path):
    """Split a metrics stream into (MetricSeries, list of FreeEnergyReport)."""
    series, reports = mt.MetricSeries(), []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["type"] == "metrics":
                series.append(mt.MetricRecord.from_record(rec))
            elif rec["type"] == "free_energy":
                reports.append(FreeEnergyReport.from_record(rec))
    return series, reports


def read_checkpoint_signs(directory) -> np.ndarray:
    data = json.loads((Path(directory) / CHECKPOINT_FILE).read_text(encoding="utf-8"))
    return np.array(data["signs"], dtype=np.int64)

