"""Normalized-score statistics: aggregate point estimates with stratified
bootstrap intervals, probability of improvement, performance profiles and
sample-efficiency curves.

Scores are pooled across tasks (every task x seed run counts once) for the
aggregate estimates.  Confidence intervals resample seeds independently
within each task, 2000 replicates, percentile method, unless told otherwise.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import trim_mean

N_BOOTSTRAP = 2000
CI_LEVEL = 0.95


@dataclass
class ScoreMatrix:
    method: str
    scores: dict[str, np.ndarray]  # task -> per-seed scores

    def __post_init__(self):
        self.scores = {t: np.asarray(v, dtype=np.float64).reshape(-1) for t, v in self.scores.items()}

    @property
    def tasks(self) -> list[str]:
        return sorted(self.scores)

    def pooled(self) -> np.ndarray:
        return np.concatenate([self.scores[t] for t in self.tasks]) if self.scores else np.zeros(0)

    def check(self, min_seeds: int = 1) -> None:
        if not self.scores:
            raise ValueError(f"score matrix for {self.method!r} is empty")
        for t, v in self.scores.items():
            if len(v) < min_seeds:
                raise ValueError(f"task {t!r} of {self.method!r} has {len(v)} seeds, need >= {min_seeds}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"task {t!r} of {self.method!r} contains NaN/inf scores")


class NormalizationTable(dict):
    """task -> (min, max) with max > min."""

    def __setitem__(self, task, bounds):
        lo, hi = float(bounds[0]), float(bounds[1])
        if not hi > lo:
            raise ValueError(f"normalization bounds for {task!r} need max > min, got ({lo}, {hi})")
        super().__setitem__(task, (lo, hi))

    @classmethod
    def from_rows(cls, rows) -> NormalizationTable:
        t = cls()
        for task, lo, hi in rows:
            t[task] = (lo, hi)
        return t

    @classmethod
    def from_scores(cls, matrices, extra: dict[str, list[float]] | None = None) -> NormalizationTable:
        """Min/max over every score seen per task (all methods, plus optional extra values such as curves)."""
        seen: dict[str, list[float]] = {}
        for m in matrices:
            for task, v in m.scores.items():
                seen.setdefault(task, []).extend(v.tolist())
        for task, v in (extra or {}).items():
            seen.setdefault(task, []).extend(v)
        t = cls()
        for task, v in seen.items():
            lo, hi = min(v), max(v)
            if hi <= lo:
                hi = lo + 1.0
            t[task] = (lo, hi)
        return t

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["task", "min", "max"])
            for task in sorted(self):
                w.writerow([task, repr(self[task][0]), repr(self[task][1])])

    @classmethod
    def from_csv(cls, path) -> NormalizationTable:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != ["task", "min", "max"]:
                raise ValueError(f"{path}: expected header task,min,max, got {reader.fieldnames}")
            return cls.from_rows((r["task"], float(r["min"]), float(r["max"])) for r in reader)


def normalize_value(x, bounds) -> np.ndarray:
    lo, hi = bounds
    return (np.asarray(x, dtype=np.float64) - lo) / (hi - lo)


def normalize(scores: ScoreMatrix, table: NormalizationTable) -> ScoreMatrix:
    """(s - min) / (max - min) per task.  Not clipped: values outside [0, 1] flag a stale table."""
    missing = [t for t in scores.scores if t not in table]
    if missing:
        raise KeyError(f"no normalization bounds for tasks {missing}")
    return ScoreMatrix(scores.method, {t: normalize_value(v, table[t]) for t, v in scores.scores.items()})


# -- point estimates ---------------------------------------------------------


def iqm(x) -> float:
    return float(trim_mean(np.asarray(x, dtype=np.float64), 0.25))


def optimality_gap(x, target: float = 1.0) -> float:
    return float(np.mean(np.maximum(0.0, target - np.asarray(x, dtype=np.float64))))


ESTIMATORS = {
    "median": lambda x: float(np.median(x)),
    "iqm": iqm,
    "mean": lambda x: float(np.mean(x)),
    "optimality_gap": optimality_gap,
}


def _bootstrap_indices(rng: np.random.Generator, n_seeds: int, reps: int) -> np.ndarray:
    return rng.integers(0, n_seeds, size=(reps, n_seeds))


def stratified_bootstrap(scores: ScoreMatrix, stat, reps: int = N_BOOTSTRAP, seed: int = 0) -> np.ndarray:
    """``stat`` of the pooled scores for each of ``reps`` within-task resamples."""
    rng = np.random.default_rng(seed)
    tasks = scores.tasks
    resampled = [scores.scores[t][_bootstrap_indices(rng, len(scores.scores[t]), reps)] for t in tasks]
    pooled = np.concatenate(resampled, axis=1)
    return np.array([stat(row) for row in pooled])


def percentile_ci(samples: np.ndarray, level: float = CI_LEVEL) -> tuple[float, float]:
    a = (1.0 - level) / 2.0
    lo, hi = np.percentile(samples, [100 * a, 100 * (1 - a)])
    return float(lo), float(hi)


def aggregate_point_estimates(normalized: ScoreMatrix, reps: int = N_BOOTSTRAP, seed: int = 0) -> dict:
    """``{name: {"estimate", "ci_low", "ci_high"}}`` for median, IQM, mean and optimality gap."""
    normalized.check(min_seeds=2)
    pooled = normalized.pooled()
    out = {}
    for i, (name, fn) in enumerate(ESTIMATORS.items()):
        boot = stratified_bootstrap(normalized, fn, reps, seed + i)
        lo, hi = percentile_ci(boot)
        out[name] = {"estimate": fn(pooled), "ci_low": lo, "ci_high": hi}
    return out


# -- probability of improvement ----------------------------------------------


def _pairwise_win_rate(x: np.ndarray, y: np.ndarray) -> float:
    diff = x[:, None] - y[None, :]
    return float(np.mean((diff > 0) + 0.5 * (diff == 0)))


def probability_of_improvement(x: ScoreMatrix, y: ScoreMatrix, reps: int = N_BOOTSTRAP, seed: int = 0) -> dict:
    """P(X > Y): per-task win rate over all seed pairs (ties count 1/2), averaged over tasks."""
    x.check()
    y.check()
    if set(x.tasks) != set(y.tasks):
        raise ValueError(f"task sets differ: {x.tasks} vs {y.tasks}")
    tasks = x.tasks
    estimate = float(np.mean([_pairwise_win_rate(x.scores[t], y.scores[t]) for t in tasks]))
    rng = np.random.default_rng(seed)
    boot = np.zeros(reps)
    for t in tasks:
        xs, ys = x.scores[t], y.scores[t]
        xi = _bootstrap_indices(rng, len(xs), reps)
        yi = _bootstrap_indices(rng, len(ys), reps)
        xb, yb = xs[xi], ys[yi]
        diff = xb[:, :, None] - yb[:, None, :]
        boot += np.mean((diff > 0) + 0.5 * (diff == 0), axis=(1, 2))
    boot /= len(tasks)
    lo, hi = percentile_ci(boot)
    return {"estimate": estimate, "ci_low": lo, "ci_high": hi}


# -- profiles and curves --------------------------------------------------------


def performance_profile(normalized: ScoreMatrix, thresholds) -> np.ndarray:
    """Fraction of all task x seed scores strictly above each threshold."""
    pooled = np.sort(normalized.pooled())
    tau = np.asarray(thresholds, dtype=np.float64)
    return 1.0 - np.searchsorted(pooled, tau, side="right") / len(pooled)


def sample_efficiency_curve(curves: dict[str, list[np.ndarray]], table: NormalizationTable):
    """Mean normalized return and its standard error at each evaluation index.

    ``curves`` maps task -> list of per-seed return curves (equal length).
    Returns ``(mean, stderr)`` arrays over the pooled task x seed runs.
    """
    rows = []
    for task in sorted(curves):
        for c in curves[task]:
            rows.append(normalize_value(c, table[task]))
    if not rows:
        raise ValueError("no curves supplied")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise ValueError(f"curves have different lengths: {sorted(lengths)}")
    data = np.vstack(rows)
    mean = data.mean(axis=0)
    if len(data) == 1:
        return mean, np.zeros_like(mean)
    return mean, data.std(axis=0, ddof=1) / np.sqrt(len(data))


# -- ingestion -------------------------------------------------------------------


def read_run_records(paths) -> list[dict]:
    """Run summaries from ``summary.json`` files or JSON-lines files of the same records."""
    records = []
    for p in paths:
        p = Path(p)
        text = p.read_text()
        if p.suffix == ".jsonl":
            records.extend(json.loads(line) for line in text.splitlines() if line.strip())
        else:
            obj = json.loads(text)
            records.extend(obj if isinstance(obj, list) else [obj])
    return records


def score_matrices(records, score_key: str = "absolute_mean") -> dict[str, ScoreMatrix]:
    """Group completed run records into one score matrix per method."""
    grouped: dict[str, dict[str, list[float]]] = {}
    for r in records:
        if not r.get("completed", True) or r.get(score_key) is None:
            continue
        grouped.setdefault(r["method"], {}).setdefault(r["env"], []).append(float(r[score_key]))
    return {m: ScoreMatrix(m, tasks) for m, tasks in grouped.items()}


def curves_by_method(records) -> dict[str, dict[str, list[np.ndarray]]]:
    out: dict[str, dict[str, list[np.ndarray]]] = {}
    for r in records:
        if not r.get("completed", True) or not r.get("eval_curve"):
            continue
        out.setdefault(r["method"], {}).setdefault(r["env"], []).append(np.array([m for _, m in r["eval_curve"]]))
    return out


def curve_transitions(records) -> list[int]:
    for r in records:
        if r.get("eval_curve"):
            return [int(t) for t, _ in r["eval_curve"]]
    return []
