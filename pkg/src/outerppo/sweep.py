"""Grid and random hyperparameter sweeps with multi-seed trials.

Results go to an append-only JSON-lines log with two record kinds::

    {"kind": "seed",  "trial": i, "agent": a, "seed": s, "params": {...}, "summary": {...}}
    {"kind": "trial", "trial": i, "params": {...}, "status": "done"|"nan", "objective": x|null, ...}

Re-running a sweep against an existing log skips every (trial, agent) pair
already recorded, so an interrupted sweep resumes where it stopped.  Agent
``a`` of trial ``i`` trains with seed ``derive(root_seed, i, a)``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, resolve
from .driver import train
from .errors import ConfigError
from .metrics import NormalizationTable, normalize_value
from .rng import Streams, derive

OBJECTIVES = ("final_eval_mean", "best_eval_mean", "absolute_mean")


@dataclass
class SweepSpec:
    base: dict = field(default_factory=dict)
    axes: list = field(default_factory=list)  # [(path, [values...]), ...] for grid mode
    ranges: dict = field(default_factory=dict)  # path -> (low, high, scale) for random mode
    mode: str = "grid"
    seeds_per_trial: int = 4
    trial_budget: int | None = None
    objective: str = "final_eval_mean"
    root_seed: int = 0

    def validate(self) -> SweepSpec:
        if self.mode not in ("grid", "random"):
            raise ConfigError(f"sweep mode must be grid or random, got {self.mode!r}")
        if self.seeds_per_trial < 1:
            raise ConfigError("seeds_per_trial must be >= 1")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {', '.join(OBJECTIVES)}")
        if self.mode == "grid":
            if not self.axes:
                raise ConfigError("a grid sweep needs at least one axis")
            paths = [p for p, _ in self.axes]
            if len(set(paths)) != len(paths):
                raise ConfigError("duplicate sweep axis")
            for p, values in self.axes:
                if not values or len(set(map(json.dumps, values))) != len(values):
                    raise ConfigError(f"axis {p!r} needs distinct values")
        else:
            if not self.ranges:
                raise ConfigError("a random sweep needs at least one range")
            if not self.trial_budget or self.trial_budget < 1:
                raise ConfigError("a random sweep needs trial_budget >= 1")
            for p, (lo, hi, scale) in self.ranges.items():
                if scale not in ("linear", "log", "int", "pow2") or not hi >= lo:
                    raise ConfigError(f"bad range for {p!r}: {(lo, hi, scale)}")
        # Every assignment must type-check before any training starts.
        for params in self.assignments()[:1]:
            self.run_config(params, 0)
        return self

    # -- enumeration ----------------------------------------------------------

    @property
    def axis_names(self) -> list[str]:
        return [p for p, _ in self.axes] if self.mode == "grid" else list(self.ranges)

    def assignments(self) -> list[dict]:
        if self.mode == "grid":
            paths = [p for p, _ in self.axes]
            combos = itertools.product(*[values for _, values in self.axes])
            out = [dict(zip(paths, c)) for c in combos]
            return out[: self.trial_budget] if self.trial_budget else out
        return [self._sample(i) for i in range(self.trial_budget)]

    def _sample(self, trial: int) -> dict:
        streams = Streams.single(derive(self.root_seed, "sample", trial))
        params = {}
        for path in sorted(self.ranges):
            lo, hi, scale = self.ranges[path]
            u = float(streams.uniform()[0])
            if scale == "linear":
                params[path] = lo + u * (hi - lo)
            elif scale == "log":
                params[path] = math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))
            elif scale == "int":
                params[path] = int(lo + min(int(u * (hi - lo + 1)), hi - lo))
            else:
                a, b = int(round(math.log2(lo))), int(round(math.log2(hi)))
                params[path] = 2 ** (a + min(int(u * (b - a + 1)), b - a))
        return params

    def seed(self, trial: int, agent: int) -> int:
        return derive(self.root_seed, trial, agent)

    def run_config(self, params: dict, seed: int) -> RunConfig:
        overrides = [(k, v) for k, v in params.items()] + [("seed", seed)]
        return resolve(self.base, overrides)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "axes": [[p, list(v)] for p, v in self.axes],
            "ranges": {k: list(v) for k, v in self.ranges.items()},
            "mode": self.mode,
            "seeds_per_trial": self.seeds_per_trial,
            "trial_budget": self.trial_budget,
            "objective": self.objective,
            "root_seed": self.root_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SweepSpec:
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown sweep keys: {', '.join(sorted(unknown))}")
        d = dict(d)
        d["axes"] = [(p, list(v)) for p, v in d.get("axes", [])]
        d["ranges"] = {k: tuple(v) for k, v in d.get("ranges", {}).items()}
        return cls(**d)

    @classmethod
    def load(cls, path) -> SweepSpec:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read sweep spec {path}: {e}") from None


# -- execution ---------------------------------------------------------------------


def _seed_summary(config_dict: dict) -> dict:
    result = train(RunConfig.from_dict(config_dict))
    s = result.summary()
    s.pop("absolute_returns")
    return s


def read_log(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    records = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            break  # torn final line from a killed writer; everything before it is a valid prefix
    return records


def trial_record(spec: SweepSpec, trial: int, params: dict, seed_records: list[dict]) -> dict:
    seed_records = sorted(seed_records, key=lambda r: r["agent"])
    values = [r["summary"][spec.objective] for r in seed_records if r["summary"]["completed"]]
    n_nan = sum(1 for r in seed_records if not r["summary"]["completed"])
    objective = float(np.mean(values)) if values else None
    stderr = float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0 if values else None
    return {
        "kind": "trial",
        "trial": trial,
        "params": params,
        "env": seed_records[0]["summary"]["env"],
        "status": "done" if values else "nan",
        "objective": objective,
        "stderr": stderr,
        "seed_objectives": [r["summary"][spec.objective] if r["summary"]["completed"] else None for r in seed_records],
        "n_completed": len(values),
        "n_nan": n_nan,
    }


class _Log:
    """Single writer for the append-only result log."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._repair()

    def _repair(self) -> None:
        # Drop a torn trailing line so appends start on a record boundary.
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        if data and not data.endswith(b"\n"):
            self.path.write_bytes(data[: data.rfind(b"\n") + 1])

    def append(self, record: dict) -> None:
        with open(self.path, "a") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")
            f.flush()
            os.fsync(f.fileno())


@dataclass
class SweepResult:
    spec: SweepSpec
    records: list[dict]

    @property
    def trials(self) -> list[dict]:
        return sorted((r for r in self.records if r["kind"] == "trial"), key=lambda r: r["trial"])

    @property
    def seeds(self) -> list[dict]:
        return sorted((r for r in self.records if r["kind"] == "seed"), key=lambda r: (r["trial"], r["agent"]))

    @property
    def complete(self) -> bool:
        return len(self.trials) == len(self.spec.assignments())


def run_sweep(spec: SweepSpec, log_path, workers: int = 1, stop_after: int | None = None, on_record=None) -> SweepResult:
    """Run (or resume) a sweep.  ``stop_after`` caps the number of new seed runs, simulating an interruption."""
    spec.validate()
    log = _Log(log_path)
    existing = read_log(log_path)
    assignments = spec.assignments()
    done_seeds = {(r["trial"], r["agent"]): r for r in existing if r["kind"] == "seed"}
    done_trials = {r["trial"] for r in existing if r["kind"] == "trial"}
    if len(done_trials) != sum(1 for r in existing if r["kind"] == "trial"):
        raise ValueError(f"{log_path}: duplicate trial ids in sweep log")

    jobs = []
    for trial, params in enumerate(assignments):
        for agent in range(spec.seeds_per_trial):
            if (trial, agent) not in done_seeds:
                seed = spec.seed(trial, agent)
                jobs.append((trial, agent, seed, spec.run_config(params, seed).to_dict()))
    if stop_after is not None:
        jobs = jobs[:stop_after]

    def record_seed(trial, agent, seed, summary):
        rec = {"kind": "seed", "trial": trial, "agent": agent, "seed": seed, "params": assignments[trial], "summary": summary}
        log.append(rec)
        done_seeds[(trial, agent)] = rec
        if on_record:
            on_record(rec)
        finish_ready()

    def finish_ready():
        for trial, params in enumerate(assignments):
            if trial in done_trials:
                continue
            recs = [done_seeds.get((trial, a)) for a in range(spec.seeds_per_trial)]
            if all(recs):
                rec = trial_record(spec, trial, params, recs)
                log.append(rec)
                done_trials.add(trial)
                if on_record:
                    on_record(rec)

    finish_ready()
    if workers <= 1:
        for trial, agent, seed, cfg in jobs:
            record_seed(trial, agent, seed, _seed_summary(cfg))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(j, pool.submit(_seed_summary, j[3])) for j in jobs]
            # Collected in job order so the log is the same whatever the scheduling.
            for (trial, agent, seed, _), fut in futures:
                record_seed(trial, agent, seed, fut.result())
    return SweepResult(spec, read_log(log_path))


def load_result(spec: SweepSpec, log_path) -> SweepResult:
    return SweepResult(spec, read_log(log_path))


# -- analysis ------------------------------------------------------------------------


def best_trial(result: SweepResult) -> dict:
    """Highest objective among completed trials; ties go to the lowest trial id."""
    best = None
    for t in result.trials:
        if t["status"] != "done":
            continue
        if best is None or t["objective"] > best["objective"]:
            best = t
    if best is None:
        raise ValueError("sweep has no completed trials")
    return best


def _normalized_seed_values(result: SweepResult, trial: dict, table: NormalizationTable | None) -> np.ndarray:
    vals = np.array([v for v in trial["seed_objectives"] if v is not None], dtype=np.float64)
    if table is not None:
        vals = normalize_value(vals, table[trial["env"]])
    return vals


def sensitivity_surface(result: SweepResult, axis_x: str, axis_y: str | None = None, table: NormalizationTable | None = None):
    """Mean (optionally normalized) objective over the sweep axes.

    1-D: returns ``(xs, mean, stderr)`` with one point per distinct ``axis_x``
    value (seeds pooled over any other axes).  2-D: returns ``(xs, ys, grid)``
    with ``grid[j, i]`` the mean at ``(xs[i], ys[j])`` and NaN where the
    trial is missing or produced no completed seed.
    """
    trials = result.trials
    names = result.spec.axis_names
    for a in (axis_x, axis_y):
        if a is not None and a not in names:
            raise ValueError(f"{a!r} is not a sweep axis; axes: {', '.join(names)}")
    xs = _axis_values(result.spec, axis_x)
    if axis_y is None:
        mean = np.full(len(xs), np.nan)
        err = np.full(len(xs), np.nan)
        for i, x in enumerate(xs):
            vals = [_normalized_seed_values(result, t, table) for t in trials if t["params"][axis_x] == x]
            vals = np.concatenate(vals) if vals else np.zeros(0)
            if len(vals):
                mean[i] = vals.mean()
                err[i] = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
        return xs, mean, err
    ys = _axis_values(result.spec, axis_y)
    grid = np.full((len(ys), len(xs)), np.nan)
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            vals = [_normalized_seed_values(result, t, table) for t in trials if t["params"][axis_x] == x and t["params"][axis_y] == y]
            vals = np.concatenate(vals) if vals else np.zeros(0)
            if len(vals):
                grid[j, i] = vals.mean()
    return xs, ys, grid


def _axis_values(spec: SweepSpec, axis: str) -> list:
    if spec.mode == "grid":
        return list(dict(spec.axes)[axis])
    return sorted({p[axis] for p in spec.assignments()})


def export_csv(result: SweepResult, dest) -> None:
    """Write trial summaries to a path or an open text stream."""
    if hasattr(dest, "write"):
        _write_trials_csv(result, dest)
    else:
        with open(dest, "w", newline="") as f:
            _write_trials_csv(result, f)


def _write_trials_csv(result: SweepResult, f) -> None:
    names = result.spec.axis_names
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["trial", *names, "env", "status", "objective", "stderr", "n_completed", "n_nan"])
    for t in result.trials:
        w.writerow(
            [t["trial"], *[t["params"][n] for n in names], t["env"], t["status"],
             "" if t["objective"] is None else repr(t["objective"]),
             "" if t["stderr"] is None else repr(t["stderr"]), t["n_completed"], t["n_nan"]]
        )
