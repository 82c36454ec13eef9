"""File-based figures: every plot is written as an SVG plus a CSV of the plotted numbers."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("aggregates", "poi", "profile", "efficiency", "sensitivity-1d", "sensitivity-2d")

plt.rcParams.update(
    {
        "svg.hashsalt": "outerppo",  # stable element ids, so identical data gives identical files
        "svg.fonttype": "none",
        "font.size": 9,
        "axes.spines.top": False,
        "axes.spines.right": False,
    }
)


def _save(fig, stem: Path) -> Path:
    stem.parent.mkdir(parents=True, exist_ok=True)
    path = stem.with_suffix(".svg")
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    return path


def _write_csv(stem: Path, header, rows) -> Path:
    path = stem.with_suffix(".csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return path


def _require(cond, what: str) -> None:
    if not cond:
        raise ValueError(f"nothing to plot: {what}")


def plot_aggregates(aggregates: dict[str, dict], stem) -> tuple[Path, Path]:
    """``aggregates[method][estimator] = {"estimate", "ci_low", "ci_high"}``."""
    _require(aggregates, "no methods in aggregate metrics")
    stem = Path(stem)
    methods = list(aggregates)
    estimators = list(next(iter(aggregates.values())))
    fig, axes = plt.subplots(1, len(estimators), figsize=(2.4 * len(estimators), 0.4 * len(methods) + 1.2), sharey=True)
    axes = np.atleast_1d(axes)
    rows = []
    for ax, est in zip(axes, estimators):
        for i, m in enumerate(methods):
            e = aggregates[m][est]
            ax.barh(i, e["ci_high"] - e["ci_low"], left=e["ci_low"], height=0.6, color=f"C{i}", alpha=0.6)
            ax.plot([e["estimate"]] * 2, [i - 0.3, i + 0.3], color="k", lw=1)
            rows.append([m, est, e["estimate"], e["ci_low"], e["ci_high"]])
        ax.set_title(est.replace("_", " "))
        ax.set_xlabel("normalized score")
    axes[0].set_yticks(range(len(methods)), methods)
    return _save(fig, stem), _write_csv(stem, ["method", "estimator", "estimate", "ci_low", "ci_high"], rows)


def plot_poi(poi: dict[str, dict], baseline: str, stem) -> tuple[Path, Path]:
    """``poi[method] = {"estimate", "ci_low", "ci_high"}`` for P(method > baseline)."""
    _require(poi, "no probability-of-improvement entries")
    stem = Path(stem)
    methods = list(poi)
    fig, ax = plt.subplots(figsize=(4, 0.4 * len(methods) + 1.2))
    rows = []
    for i, m in enumerate(methods):
        e = poi[m]
        ax.barh(i, e["ci_high"] - e["ci_low"], left=e["ci_low"], height=0.6, color=f"C{i}", alpha=0.6)
        ax.plot([e["estimate"]] * 2, [i - 0.3, i + 0.3], color="k", lw=1)
        rows.append([m, baseline, e["estimate"], e["ci_low"], e["ci_high"]])
    ax.axvline(0.5, color="grey", ls="--", lw=0.8)
    ax.set_yticks(range(len(methods)), methods)
    ax.set_xlabel(f"P(X > {baseline})")
    return _save(fig, stem), _write_csv(stem, ["method", "baseline", "estimate", "ci_low", "ci_high"], rows)


def plot_profile(thresholds, profiles: dict[str, list[float]], stem) -> tuple[Path, Path]:
    _require(profiles and len(thresholds), "no performance profiles")
    stem = Path(stem)
    fig, ax = plt.subplots(figsize=(4, 3))
    for i, (m, f) in enumerate(profiles.items()):
        ax.step(thresholds, f, where="post", label=m, color=f"C{i}")
    ax.set_xlabel("normalized score threshold")
    ax.set_ylabel("fraction of runs above threshold")
    ax.legend(frameon=False)
    rows = [[m, float(t), float(v)] for m, f in profiles.items() for t, v in zip(thresholds, f)]
    return _save(fig, stem), _write_csv(stem, ["method", "threshold", "fraction"], rows)


def plot_efficiency(transitions, curves: dict[str, dict], stem) -> tuple[Path, Path]:
    """``curves[method] = {"mean": [...], "stderr": [...]}`` at each entry of ``transitions``."""
    _require(curves and len(transitions), "no sample-efficiency curves")
    stem = Path(stem)
    x = np.asarray(transitions, dtype=float)
    fig, ax = plt.subplots(figsize=(4, 3))
    rows = []
    for i, (m, c) in enumerate(curves.items()):
        mean, se = np.asarray(c["mean"]), np.asarray(c["stderr"])
        ax.plot(x, mean, color=f"C{i}", label=m)
        ax.fill_between(x, mean - se, mean + se, color=f"C{i}", alpha=0.2, lw=0)
        rows += [[m, int(t), float(a), float(b)] for t, a, b in zip(transitions, mean, se)]
    ax.set_xlabel("transitions")
    ax.set_ylabel("mean normalized return")
    ax.legend(frameon=False)
    return _save(fig, stem), _write_csv(stem, ["method", "transitions", "mean", "stderr"], rows)


def plot_sensitivity_1d(xs, mean, stderr, axis: str, stem, ylabel: str = "objective") -> tuple[Path, Path]:
    _require(len(xs), "empty sensitivity curve")
    stem = Path(stem)
    x = np.asarray(xs, dtype=float)
    mean, stderr = np.asarray(mean, dtype=float), np.asarray(stderr, dtype=float)
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.plot(x, mean, marker="o", ms=3, color="C0")
    ax.fill_between(x, mean - stderr, mean + stderr, color="C0", alpha=0.2, lw=0)
    if np.any(np.isfinite(mean)):
        best = int(np.nanargmax(mean))
        ax.plot(x[best], mean[best], marker="*", ms=10, color="C0", mec="k", mew=0.5)
    ax.set_xlabel(axis)
    ax.set_ylabel(ylabel)
    rows = [[float(a), float(b), float(c)] for a, b, c in zip(x, mean, stderr)]
    return _save(fig, stem), _write_csv(stem, [axis, "mean", "stderr"], rows)


def plot_sensitivity_2d(xs, ys, grid, axis_x: str, axis_y: str, stem) -> tuple[Path, Path]:
    """Heatmap with missing / NaN trials left blank."""
    _require(len(xs) and len(ys), "empty sensitivity grid")
    stem = Path(stem)
    grid = np.asarray(grid, dtype=float)
    cmap = plt.get_cmap("viridis").copy()
    cmap.set_bad("white")
    fig, ax = plt.subplots(figsize=(0.35 * len(xs) + 1.8, 0.35 * len(ys) + 1.2))
    im = ax.imshow(np.ma.masked_invalid(grid), origin="lower", cmap=cmap, aspect="auto")
    ax.set_xticks(range(len(xs)), [f"{v:g}" for v in xs], rotation=90)
    ax.set_yticks(range(len(ys)), [f"{v:g}" for v in ys])
    ax.set_xlabel(axis_x)
    ax.set_ylabel(axis_y)
    fig.colorbar(im, ax=ax)
    rows = [[float(x), float(y), float(grid[j, i])] for j, y in enumerate(ys) for i, x in enumerate(xs)]
    return _save(fig, stem), _write_csv(stem, [axis_x, axis_y, "mean"], rows)
