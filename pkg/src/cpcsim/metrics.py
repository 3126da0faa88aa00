"""Agreement and adaptation measures."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NOT_RECOVERED = None
PRE_SHIFT_WINDOW = 10
DEFAULT_RECOVERY_THRESHOLD = 0.9


def _pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label vectors must be 1-D and equal length: {a.shape} vs {b.shape}")
    if a.shape[0] < 2:
        raise ValueError("need at least two labels")
    return a, b


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1.0) / 2.0


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Hubert-Arabie adjusted Rand index from the contingency table."""
    a, b = _pair(labels_a, labels_b)
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1)
    n = a.shape[0]
    sum_cells = _comb2(table).sum()
    sum_rows = _comb2(table.sum(axis=1)).sum()
    sum_cols = _comb2(table.sum(axis=0)).sum()
    expected = sum_rows * sum_cols / _comb2(n)
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        # both partitions trivial (all-in-one or all singletons)
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def cohens_kappa(a_signs, b_signs) -> float:
    """Chance-corrected agreement; 1.0 when both raters are constant and equal."""
    a, b = _pair(a_signs, b_signs)
    p_o = float(np.mean(a == b))
    labels = np.union1d(a, b)
    pa = np.array([np.mean(a == v) for v in labels])
    pb = np.array([np.mean(b == v) for v in labels])
    p_e = float(pa @ pb)
    if p_e >= 1.0:
        return 1.0 if p_o >= 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


@dataclass
class MetricRecord:
    round: int
    kappa: float
    ari_signs_vs_truth: float | None
    ari_z_vs_truth: tuple[float, ...] | None
    free_energy_total: float

    @property
    def ari_z_mean(self) -> float | None:
        if self.ari_z_vs_truth is None:
            return None
        return float(np.mean(self.ari_z_vs_truth))

    def to_record(self) -> dict:
        return {
            "type": "metrics",
            "round": int(self.round),
            "kappa": self.kappa,
            "ari_signs_vs_truth": self.ari_signs_vs_truth,
            "ari_z_vs_truth": None if self.ari_z_vs_truth is None else list(self.ari_z_vs_truth),
            "free_energy_total": self.free_energy_total,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "MetricRecord":
        z = rec.get("ari_z_vs_truth")
        return cls(
            rec["round"], rec["kappa"], rec.get("ari_signs_vs_truth"),
            None if z is None else tuple(z), rec["free_energy_total"],
        )


@dataclass
class MetricSeries:
    records: list = field(default_factory=list)

    def append(self, rec: MetricRecord) -> None:
        if self.records and rec.round <= self.records[-1].round:
            raise ValueError("rounds must be strictly increasing")
        for name in ("kappa", "ari_signs_vs_truth"):
            v = getattr(rec, name)
            if v is not None and not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                raise ValueError(f"{name}={v} outside [-1, 1]")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    @property
    def rounds(self) -> np.ndarray:
        return np.array([r.round for r in self.records])

    def values(self, metric: str) -> np.ndarray:
        """Metric by name; ``ari_z_mean`` averages the per-agent percept ARIs."""
        return np.array([getattr(r, metric) for r in self.records], dtype=float)

    @classmethod
    def from_values(cls, metric: str, values, start_round: int = 0) -> "MetricSeries":
        """Series carrying a single metric, mostly for tests and analysis."""
        out = cls()
        for i, v in enumerate(values):
            fields = dict(kappa=0.0, ari_signs_vs_truth=None, ari_z_vs_truth=None,
                          free_energy_total=0.0)
            if metric == "ari_z_mean":
                fields["ari_z_vs_truth"] = (float(v),)
            else:
                fields[metric] = float(v)
            out.append(MetricRecord(round=start_round + i, **fields))
        return out


def adaptation_time(
    series: MetricSeries,
    shift_round: int,
    target_metric: str = "ari_z_mean",
    threshold: float = DEFAULT_RECOVERY_THRESHOLD,
):
    """Rounds after ``shift_round`` until the metric is back to ``threshold`` x baseline.

    The baseline is the median over the ``PRE_SHIFT_WINDOW`` rounds before the
    shift. Returns ``NOT_RECOVERED`` (``None``) if the run ends first.
    """
    rounds = series.rounds
    values = series.values(target_metric)
    pre = values[(rounds < shift_round) & (rounds >= shift_round - PRE_SHIFT_WINDOW)]
    if pre.size == 0:
        raise ValueError("no pre-shift rounds to form a baseline")
    if not np.any(rounds >= shift_round):
        raise ValueError("shift_round lies beyond the series")
    target = threshold * float(np.median(pre))
    for r, v in zip(rounds, values):
        if r >= shift_round and v >= target:
            return int(r - shift_round)
    return NOT_RECOVERED


def adaptation_sort_key(t) -> float:
    """Orders adaptation times with 'not recovered' after every finite time."""
    return math.inf if t is NOT_RECOVERED else float(t)


def agreement_kappa(sign_estimates) -> float:
    """Mean pairwise kappa between agents' per-object sign estimates."""
    k = len(sign_estimates)
    vals = [
        cohens_kappa(sign_estimates[i], sign_estimates[j])
        for i in range(k) for j in range(i + 1, k)
    ]
    return float(np.mean(vals))
