"""Experiment configuration: YAML (or JSON) in, validated dataclass out."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from .agent import MODES
from .probkernels import GaussCatHyper
from .protocol import VARIANTS
from .world import ShiftSpec, WorldConfig


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


_WORLD_KEYS = {f.name for f in fields(WorldConfig)} - {"seed"}
_HYPER_KEYS = {"dirichlet_alpha", "ng_mean0", "ng_kappa0", "ng_a0", "ng_b0"}
_TOP_KEYS = {
    "world", "num_signs", "num_categories", "hyper", "protocol_variant", "mode",
    "rounds", "freeze_after", "shift_at", "seeds", "output_dir",
}
DEFAULT_SHIFT_FACTOR = 3.0


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldConfig
    num_signs: int
    num_categories: int
    hyper: GaussCatHyper
    rounds: int
    protocol_variant: str = "mh"
    mode: str = "sampled"
    freeze_after: int | None = None
    shift_at: int | None = None
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs"

    def __post_init__(self):
        if self.rounds < 1:
            raise ConfigError("rounds", "must be >= 1")
        if self.protocol_variant not in VARIANTS:
            raise ConfigError("protocol_variant", f"must be one of {sorted(VARIANTS)}")
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {list(MODES)}")
        if self.num_signs < 1:
            raise ConfigError("num_signs", "must be >= 1")
        if self.num_categories < 1:
            raise ConfigError("num_categories", "must be >= 1")
        if self.shift_at is not None and not 0 <= self.shift_at < self.rounds:
            raise ConfigError("shift_at", f"must lie in [0, rounds={self.rounds})")
        if self.freeze_after is not None and not 0 <= self.freeze_after < self.rounds:
            raise ConfigError("freeze_after", f"must lie in [0, rounds={self.rounds})")
        if not self.seeds:
            raise ConfigError("seeds", "must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds", "must be distinct")
        if (self.shift_at is None) != (self.world.shift is None):
            raise ConfigError("shift_at", "world.shift and shift_at must be given together")

    def world_for_seed(self, seed: int) -> WorldConfig:
        return replace(self.world, seed=int(seed))

    def to_dict(self) -> dict:
        world = {k: v for k, v in asdict(self.world).items() if k not in ("shift", "seed")}
        if self.world.shift is not None:
            world["shift"] = {"kind": self.world.shift.kind, "magnitude": self.world.shift.magnitude}
        hyper = self.hyper.to_dict()
        del hyper["num_signs"], hyper["num_categories"]
        return {
            "world": world,
            "num_signs": self.num_signs,
            "num_categories": self.num_categories,
            "hyper": hyper,
            "protocol_variant": self.protocol_variant,
            "mode": self.mode,
            "rounds": self.rounds,
            "freeze_after": self.freeze_after,
            "shift_at": self.shift_at,
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
        }


def _check_keys(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(where or "config", "expected a mapping")
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}" if where else key, "unknown key")


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from plain data, filling documented defaults."""
    _check_keys(raw, _TOP_KEYS, "")
    if "world" not in raw:
        raise ConfigError("world", "required")
    if "rounds" not in raw:
        raise ConfigError("rounds", "required")
    world_raw = dict(raw["world"])
    _check_keys(world_raw, _WORLD_KEYS, "world")
    shift_raw = world_raw.pop("shift", None)
    shift_at = raw.get("shift_at")
    try:
        world = WorldConfig(**world_raw)
    except ValueError as exc:
        raise ConfigError("world", str(exc)) from None
    except TypeError as exc:
        raise ConfigError("world", str(exc)) from None
    if shift_at is not None:
        shift_raw = dict(shift_raw or {})
        _check_keys(shift_raw, {"kind", "magnitude"}, "world.shift")
        shift_raw.setdefault("kind", "translate")
        shift_raw.setdefault("magnitude", DEFAULT_SHIFT_FACTOR * world.category_separation)
        try:
            world = replace(world, shift=ShiftSpec(int(shift_at), **shift_raw))
        except ValueError as exc:
            raise ConfigError("world.shift", str(exc)) from None
    elif shift_raw is not None:
        raise ConfigError("shift_at", "required when world.shift is given")

    num_cats = int(raw.get("num_categories", world.num_true_categories))
    num_signs = int(raw.get("num_signs", world.num_true_categories))
    hyper_raw = dict(raw.get("hyper") or {})
    _check_keys(hyper_raw, _HYPER_KEYS, "hyper")
    try:
        hyper = GaussCatHyper(num_signs=num_signs, num_categories=num_cats, **hyper_raw)
    except ValueError as exc:
        raise ConfigError("hyper", str(exc)) from None
    seeds = raw.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    return ExperimentConfig(
        world=world,
        num_signs=num_signs,
        num_categories=num_cats,
        hyper=hyper,
        rounds=int(raw["rounds"]),
        protocol_variant=raw.get("protocol_variant", "mh"),
        mode=raw.get("mode", "sampled"),
        freeze_after=raw.get("freeze_after"),
        shift_at=shift_at,
        seeds=tuple(int(s) for s in seeds),
        output_dir=str(raw.get("output_dir", "runs")),
    )


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    return config_from_dict(raw or {})


def emit_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)


def write_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(emit_config(config), encoding="utf-8")
