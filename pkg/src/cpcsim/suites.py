"""Built-in experiment suites: oracle-validation, baseline-comparison, plasticity.

Each suite returns a :class:`SuiteResult` whose criteria carry the measured
values next to the thresholds they were judged against.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics as mt
from . import oracle
from .config import ExperimentConfig
from .probkernels import GaussCatHyper
from .protocol import SignAssignment, run_fixed_chain
from .runner import Simulation, run_experiment
from .world import ShiftSpec, WorldConfig

SEEDS = tuple(range(10))

ORACLE_POST_BURN_ROUNDS = 50_000
ORACLE_TV_TOLERANCE = 0.05
ORACLE_SEED = 20240501

FE_WINDOW = 20
PLATEAU_WINDOW = 50
MIN_SEEDS_PASSING = 8


@dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: " + json.dumps(
            self.detail, sort_keys=True, default=float
        )


@dataclass
class SuiteResult:
    name: str
    criteria: list
    elapsed_seconds: float
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_dict(self) -> dict:
        return {
            "suite": self.name,
            "passed": self.passed,
            "elapsed_seconds": self.elapsed_seconds,
            "criteria": [asdict(c) for c in self.criteria],
            "extra": self.extra,
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"suite_{self.name}.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float) + "\n")
        return path


def standard_config(**overrides) -> ExperimentConfig:
    """K=2, D=100, four categories, separation/noise = 5, 200 rounds, 10 seeds."""
    world = WorldConfig(
        num_objects=100, num_true_categories=4, num_agents=2, feature_dim=2,
        category_separation=5.0, noise_scale=1.0,
    )
    base = dict(
        world=world, num_signs=4, num_categories=4,
        hyper=GaussCatHyper(num_signs=4, num_categories=4),
        rounds=200, protocol_variant="mh", mode="sampled", seeds=SEEDS,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def shifted_config(kind="translate", magnitude=None, freeze_after=None, rounds=400, shift_at=200):
    cfg = standard_config(rounds=rounds)
    mag = 3.0 * cfg.world.category_separation if magnitude is None else magnitude
    world = replace(cfg.world, shift=ShiftSpec(shift_at, kind, mag))
    return replace(cfg, world=world, shift_at=shift_at, freeze_after=freeze_after)


def _run_all(config: ExperimentConfig, seeds=None):
    return {s: Simulation(config, s).run() for s in (seeds or config.seeds)}


def oracle_validation(out_dir=None) -> SuiteResult:
    t0 = time.perf_counter()
    inst = oracle.standard_tiny_instance()
    table = oracle.enumerate_posterior(inst)
    total = int(round(ORACLE_POST_BURN_ROUNDS / (1.0 - oracle.BURN_IN_FRACTION)))
    burn = total - ORACLE_POST_BURN_ROUNDS

    rng = np.random.default_rng(ORACLE_SEED)
    signs = SignAssignment(np.zeros(inst.num_objects, dtype=np.int64), inst.num_signs)
    t_chain = time.perf_counter()
    chain = run_fixed_chain(inst.agents, signs, inst.observations, total, "collapsed", rng)
    chain_seconds = time.perf_counter() - t_chain
    decentral = oracle.empirical_joint(chain[burn:], inst.num_signs)
    tv_oracle = oracle.total_variation_distance(decentral, table.joint)

    gibbs = oracle.centralized_gibbs(inst, total, np.random.default_rng(ORACLE_SEED + 1))
    central = oracle.empirical_joint(gibbs, inst.num_signs)
    tv_pair = oracle.total_variation_distance(decentral, central)

    criteria = [
        CriterionResult(
            "oracle_equivalence",
            tv_oracle <= ORACLE_TV_TOLERANCE and chain_seconds < 10.0,
            {"tv": tv_oracle, "tolerance": ORACLE_TV_TOLERANCE,
             "post_burn_rounds": ORACLE_POST_BURN_ROUNDS, "chain_seconds": chain_seconds},
        ),
        CriterionResult(
            "centralized_decentralized_agreement",
            tv_pair <= ORACLE_TV_TOLERANCE,
            {"tv": tv_pair, "tolerance": ORACLE_TV_TOLERANCE,
             "tv_gibbs_vs_enumeration": oracle.total_variation_distance(central, table.joint)},
        ),
    ]
    res = SuiteResult("oracle-validation", criteria, time.perf_counter() - t0,
                      {"enumerated": table.joint.tolist(), "decentralized": decentral.tolist(),
                       "centralized": central.tolist()})
    if out_dir is not None:
        res.write(out_dir)
    return res


def windowed_median(values, end_round: int, window: int = FE_WINDOW) -> float:
    """Median over the ``window`` rounds ending at 1-based round ``end_round``."""
    values = np.asarray(values, dtype=float)
    return float(np.median(values[end_round - window:end_round]))


def baseline_comparison(out_dir=None, seeds=SEEDS) -> SuiteResult:
    t0 = time.perf_counter()
    finals = {}
    fe_series = {}
    for variant in ("mh", "never", "always"):
        cfg = standard_config(protocol_variant=variant, seeds=tuple(seeds))
        if out_dir is not None:
            run_experiment(cfg, Path(out_dir) / f"baseline_{variant}")
        runs = _run_all(cfg)
        finals[variant] = {
            "kappa": [runs[s][0].records[-1].kappa for s in seeds],
            "ari_signs_vs_truth": [runs[s][0].records[-1].ari_signs_vs_truth for s in seeds],
            "free_energy_total": [runs[s][0].records[-1].free_energy_total for s in seeds],
        }
        fe_series[variant] = {s: [r.total for r in runs[s][1]] for s in seeds}
    med = {v: {k: float(np.median(x)) for k, x in d.items()} for v, d in finals.items()}
    ordering_ok = (
        med["mh"]["kappa"] >= med["never"]["kappa"]
        and med["mh"]["ari_signs_vs_truth"] >= med["never"]["ari_signs_vs_truth"]
        and med["mh"]["free_energy_total"] <= med["never"]["free_energy_total"]
    )
    rounds = standard_config().rounds
    descents = {
        s: (windowed_median(fe_series["mh"][s], FE_WINDOW), windowed_median(fe_series["mh"][s], rounds))
        for s in seeds
    }
    n_desc = sum(late < early for early, late in descents.values())
    elapsed = time.perf_counter() - t0
    criteria = [
        CriterionResult("baseline_ordering", ordering_ok and elapsed < 120.0,
                        {"medians": med, "seconds": elapsed}),
        CriterionResult("free_energy_descent", n_desc >= MIN_SEEDS_PASSING,
                        {"seeds_descending": n_desc, "required": MIN_SEEDS_PASSING,
                         "window_medians_r20_r200": {str(k): v for k, v in descents.items()}}),
    ]
    res = SuiteResult("baseline-comparison", criteria, elapsed, {"finals": finals})
    if out_dir is not None:
        res.write(out_dir)
    return res


def _plasticity_pair(kind, magnitude, metric, seeds, shift_at=200, rounds=400):
    plastic_cfg = shifted_config(kind, magnitude, None, rounds, shift_at)
    frozen_cfg = shifted_config(kind, magnitude, shift_at, rounds, shift_at)
    rows = []
    for s in seeds:
        ps, pf = Simulation(plastic_cfg, s).run()
        fs, ff = Simulation(frozen_cfg, s).run()
        rows.append({
            "seed": s,
            "plastic_time": mt.adaptation_time(ps, shift_at, metric),
            "frozen_time": mt.adaptation_time(fs, shift_at, metric),
            "plastic_plateau": float(np.median([r.total for r in pf[-PLATEAU_WINDOW:]])),
            "frozen_plateau": float(np.median([r.total for r in ff[-PLATEAU_WINDOW:]])),
        })
    return rows


def plasticity(out_dir=None, seeds=SEEDS, metric: str = "ari_z_mean") -> SuiteResult:
    t0 = time.perf_counter()
    rows = _plasticity_pair("translate", None, metric, seeds)
    n_faster = sum(
        mt.adaptation_sort_key(r["plastic_time"]) <= mt.adaptation_sort_key(r["frozen_time"])
        for r in rows
    )
    plateau_p = float(np.median([r["plastic_plateau"] for r in rows]))
    plateau_f = float(np.median([r["frozen_plateau"] for r in rows]))
    criteria = [
        CriterionResult(
            "plasticity_adaptation",
            n_faster >= MIN_SEEDS_PASSING and plateau_f >= plateau_p,
            {"seeds_plastic_not_slower": n_faster, "required": MIN_SEEDS_PASSING,
             "metric": metric, "threshold": mt.DEFAULT_RECOVERY_THRESHOLD,
             "median_plateau_plastic": plateau_p, "median_plateau_frozen": plateau_f,
             "per_seed": rows},
        )
    ]
    # supplementary: a shift that invalidates the old language
    perm = _plasticity_pair("permute", 1.0, "ari_signs_vs_truth", seeds)
    extra = {
        "permute_shift": {
            "metric": "ari_signs_vs_truth",
            "seeds_plastic_not_slower": sum(
                mt.adaptation_sort_key(r["plastic_time"]) <= mt.adaptation_sort_key(r["frozen_time"])
                for r in perm
            ),
            "per_seed": perm,
        }
    }
    res = SuiteResult("plasticity", criteria, time.perf_counter() - t0, extra)
    if out_dir is not None:
        res.write(out_dir)
    return res


SUITES = {
    "oracle-validation": oracle_validation,
    "baseline-comparison": baseline_comparison,
    "plasticity": plasticity,
}
