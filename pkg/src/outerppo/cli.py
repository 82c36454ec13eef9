"""Command-line entry point.

Exit codes: 0 success, 1 bad input data, 2 configuration error,
3 numerical abort of a training run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import metrics, plotting, presets
from .config import RunConfig, parse_override, resolve
from .driver import Trainer, evaluate_policy, load_policy, save_policy
from .errors import CheckpointFormatError, ConfigError
from .sweep import SweepSpec, best_trial, export_csv, load_result, run_sweep, sensitivity_surface

EXIT_OK, EXIT_DATA, EXIT_CONFIG, EXIT_NAN = 0, 1, 2, 3

log = logging.getLogger("outerppo")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- train -------------------------------------------------------------------------


def _run_overrides(args) -> list:
    out = []
    for flag, path in (("env", "env"), ("seed", "seed"), ("outer", "outer.strategy"), ("sigma", "outer.sigma"),
                       ("mu", "outer.mu"), ("alpha", "outer.alpha"), ("budget", "total_transitions"), ("envs", "ppo.num_envs")):
        v = getattr(args, flag, None)
        if v is not None:
            out.append((path, v))
    return out + [parse_override(s) for s in args.set or []]


def build_run_config(args) -> RunConfig:
    base: dict = {}
    if args.preset:
        kind = presets.kind(args.preset)
        if kind not in ("run", "partial-run"):
            raise ConfigError(f"preset {args.preset!r} is a {kind} preset, not a run config")
        base = presets.get(args.preset)
    if args.config:
        try:
            tree = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        base = _deep_merge(base, tree)
    return resolve(base, _run_overrides(args))


def _deep_merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = _deep_merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def cmd_train(args) -> int:
    config = build_run_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved-config.json").write_text(config.to_json())
    events = open(out / "events.jsonl", "w")

    def on_event(e):
        events.write(json.dumps(e, sort_keys=True) + "\n")
        if e["event"] == "eval":
            log.info("eval %d  transitions=%d  mean_return=%.3f", e["index"], e["transitions"], e["mean_return"])

    with events:
        trainer = Trainer(config, on_event=on_event)
        result = trainer.run()
    (out / "summary.json").write_text(_dump(result.summary()))
    save_policy(out / "best.ckpt", config, result.best_theta)
    trainer.save(out / "final.ckpt")
    if result.nan_aborted:
        print(f"run aborted on a numerical error; partial results in {out}", file=sys.stderr)
        return EXIT_NAN
    print(f"absolute mean return {result.absolute_mean:.4f} over {config.absolute_eval_episodes} episodes")
    return EXIT_OK


# -- eval --------------------------------------------------------------------------


def cmd_eval(args) -> int:
    try:
        config, agent, theta = load_policy(args.checkpoint)
    except (OSError, CheckpointFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    returns = evaluate_policy(agent, theta, args.env or config.env, args.episodes, args.seed)
    report = {"env": args.env or config.env, "episodes": args.episodes, "eval_seed": args.seed,
              "mean_return": float(np.mean(returns)), "std_return": float(np.std(returns)),
              "returns": [float(r) for r in returns]}
    text = _dump(report)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text if args.format == "json" else f"mean_return\t{report['mean_return']!r}\nstd_return\t{report['std_return']!r}\n")
    return EXIT_OK


# -- sweep -------------------------------------------------------------------------


def _sweep_spec(args) -> SweepSpec:
    if args.preset:
        if presets.kind(args.preset) != "sweep":
            raise ConfigError(f"preset {args.preset!r} is not a sweep preset")
        d = presets.get(args.preset)
    elif args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read sweep spec {args.config}: {e}") from None
    else:
        raise ConfigError("sweep run needs --config or --preset")
    spec = SweepSpec.from_dict(d)
    base = spec.base
    if args.base:
        base = _deep_merge(presets.get(args.base) if args.base in presets.names() else json.loads(Path(args.base).read_text()), base)
    base = json.loads(json.dumps(base))
    for path, value in _run_overrides(args):
        node = base
        parts = path.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    spec.base = base
    if args.seeds is not None:
        spec.seeds_per_trial = args.seeds
    if args.root_seed is not None:
        spec.root_seed = args.root_seed
    return spec.validate()


def cmd_sweep_run(args) -> int:
    spec = _sweep_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec_path = out / "sweep-spec.json"
    text = _dump(spec.to_dict())
    if spec_path.exists() and spec_path.read_text() != text:
        raise ConfigError(f"{out} already holds a different sweep; refusing to mix results")
    spec_path.write_text(text)

    def on_record(r):
        if r["kind"] == "trial":
            log.info("trial %d %s objective=%s", r["trial"], r["params"], r["objective"])

    result = run_sweep(spec, out / "sweep.jsonl", workers=args.workers, stop_after=args.stop_after, on_record=on_record)
    n = len(spec.assignments())
    print(f"{len(result.trials)}/{n} trials complete")
    if result.trials and any(t["status"] == "done" for t in result.trials):
        best = best_trial(result)
        print(f"best trial {best['trial']}: {json.dumps(best['params'], sort_keys=True)} objective={best['objective']!r}")
    return EXIT_OK


def _load_sweep(directory):
    d = Path(directory)
    if not (d / "sweep-spec.json").exists():
        raise FileNotFoundError(f"{d} holds no sweep-spec.json")
    spec = SweepSpec.load(d / "sweep-spec.json")
    return load_result(spec, d / "sweep.jsonl")


def cmd_sweep_export(args) -> int:
    result = _load_sweep(args.sweep_dir)
    if not result.trials:
        raise ValueError("sweep has no completed trials to export")
    if args.format == "csv":
        buf = io.StringIO()
        export_csv(result, buf)
        text = buf.getvalue()
    else:
        text = "".join(json.dumps(t, sort_keys=True) + "\n" for t in result.trials)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- metrics -----------------------------------------------------------------------


def _norm_table(source: str, matrices, records) -> metrics.NormalizationTable:
    if source == "paper":
        return presets.paper_normalization()
    if source == "local":
        extra: dict[str, list[float]] = {}
        for r in records:
            for _, m in r.get("eval_curve") or []:
                extra.setdefault(r["env"], []).append(float(m))
        return metrics.NormalizationTable.from_scores(matrices.values(), extra)
    return metrics.NormalizationTable.from_csv(source)


def compute_metrics(records, norm: str = "local", baseline: str | None = None, reps: int = metrics.N_BOOTSTRAP, seed: int = 0) -> dict:
    matrices = metrics.score_matrices(records)
    if not matrices:
        raise ValueError("no completed runs in the input")
    table = _norm_table(norm, matrices, records)
    methods = sorted(matrices)
    normalized = {m: metrics.normalize(matrices[m], table) for m in methods}
    out: dict = {
        "normalization": {"source": norm, "table": {t: list(table[t]) for t in sorted(table)}},
        "methods": methods,
        "seeds": {m: {t: int(len(v)) for t, v in matrices[m].scores.items()} for m in methods},
    }
    out["aggregates"] = {m: metrics.aggregate_point_estimates(normalized[m], reps, seed) for m in methods}
    if baseline is None:
        baseline = "standard" if "standard" in methods else methods[0]
    if baseline not in matrices:
        raise ValueError(f"baseline method {baseline!r} not among {methods}")
    out["baseline"] = baseline
    out["poi"] = {m: metrics.probability_of_improvement(normalized[m], normalized[baseline], reps, seed) for m in methods if m != baseline}
    pooled = np.concatenate([normalized[m].pooled() for m in methods])
    taus = np.linspace(min(0.0, pooled.min()), max(1.0, pooled.max()), 101)
    out["profile"] = {"thresholds": taus.tolist(), "curves": {m: metrics.performance_profile(normalized[m], taus).tolist() for m in methods}}
    curves = metrics.curves_by_method(records)
    if curves:
        eff = {}
        for m in methods:
            if m in curves:
                mean, se = metrics.sample_efficiency_curve(curves[m], table)
                eff[m] = {"mean": mean.tolist(), "stderr": se.tolist()}
        out["efficiency"] = {"transitions": metrics.curve_transitions(records), "curves": eff}
    return out


def _metrics_rows(m: dict):
    for method, ests in m["aggregates"].items():
        for est, v in ests.items():
            yield [method, est, v["estimate"], v["ci_low"], v["ci_high"]]
    for method, v in m["poi"].items():
        yield [method, f"poi_vs_{m['baseline']}", v["estimate"], v["ci_low"], v["ci_high"]]


def cmd_metrics(args) -> int:
    records = metrics.read_run_records(args.inputs)
    m = compute_metrics(records, args.norm, args.baseline, args.bootstrap, args.bootstrap_seed)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(_dump(m))
    if args.format == "json":
        sys.stdout.write(_dump(m))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t" if args.format == "tsv" else ",", lineterminator="\n")
        w.writerow(["method", "metric", "estimate", "ci_low", "ci_high"])
        for r in _metrics_rows(m):
            w.writerow([f"{x:.6f}" if isinstance(x, float) else x for x in r])
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# -- plot --------------------------------------------------------------------------


def cmd_plot(args) -> int:
    out = Path(args.out)
    kind = args.kind
    if kind.startswith("sensitivity"):
        result = _load_sweep(args.input)
        if not result.trials:
            raise ValueError("nothing to plot: sweep has no completed trials")
        axes = result.spec.axis_names
        x = args.x or axes[0]
        table = None
        if args.norm == "paper":
            table = presets.paper_normalization()
        elif args.norm == "local":
            vals: dict[str, list[float]] = {}
            for t in result.trials:
                vals.setdefault(t["env"], []).extend(v for v in t["seed_objectives"] if v is not None)
            table = metrics.NormalizationTable.from_scores([], vals)
        elif args.norm != "none":
            table = metrics.NormalizationTable.from_csv(args.norm)
        label = "mean normalized objective" if table is not None else result.spec.objective
        if kind == "sensitivity-1d":
            xs, mean, se = sensitivity_surface(result, x, None, table)
            paths = plotting.plot_sensitivity_1d(xs, mean, se, x, out / "sensitivity-1d", label)
        else:
            if len(axes) < 2 and not args.y:
                raise ConfigError("sensitivity-2d needs a sweep with two axes")
            y = args.y or [a for a in axes if a != x][0]
            xs, ys, grid = sensitivity_surface(result, x, y, table)
            paths = plotting.plot_sensitivity_2d(xs, ys, grid, x, y, out / "sensitivity-2d")
    else:
        try:
            m = json.loads(Path(args.input).read_text())
        except json.JSONDecodeError as e:
            raise ValueError(f"{args.input} is not a metrics JSON file: {e}") from None
        if not isinstance(m, dict) or not m:
            raise ValueError(f"nothing to plot: {args.input} is empty")
        if kind == "aggregates":
            paths = plotting.plot_aggregates(m.get("aggregates") or {}, out / "aggregates")
        elif kind == "poi":
            paths = plotting.plot_poi(m.get("poi") or {}, m.get("baseline", "baseline"), out / "poi")
        elif kind == "profile":
            p = m.get("profile") or {}
            paths = plotting.plot_profile(p.get("thresholds", []), p.get("curves", {}), out / "profile")
        else:
            e = m.get("efficiency") or {}
            paths = plotting.plot_efficiency(e.get("transitions", []), e.get("curves", {}), out / "efficiency")
    for p in paths:
        print(p)
    return EXIT_OK


# -- presets -----------------------------------------------------------------------


def cmd_presets(args) -> int:
    if not args.name:
        for n in presets.names():
            print(f"{n}\t{presets.kind(n)}")
        return EXIT_OK
    tree = presets.get(args.name)
    if args.name == "normalization-table" and args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task", "min", "max"])
        w.writerows(tree["rows"])
        text = buf.getvalue()
    else:
        text = presets.dumps(tree)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config tree (partial trees are merged onto the defaults)")
    p.add_argument("--preset", help="start from a named preset (see `presets`)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted-path override, value parsed as JSON")
    p.add_argument("--env", help="environment id")
    p.add_argument("--seed", type=int)
    p.add_argument("--outer", choices=["standard", "lr", "nesterov", "biased"], help="outer strategy")
    p.add_argument("--sigma", type=float, help="outer learning rate")
    p.add_argument("--mu", type=float, help="outer momentum")
    p.add_argument("--alpha", type=float, help="biased-initialization rate")
    p.add_argument("--budget", type=int, help="total training transitions")
    p.add_argument("--envs", type=int, help="parallel environments per rollout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="outerppo", description="PPO with decoupled outer updates: train, sweep, evaluate, aggregate, plot.")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one agent")
    _run_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved policy")
    p.add_argument("checkpoint")
    p.add_argument("--episodes", type=int, default=128)
    p.add_argument("--seed", type=int, default=0, help="evaluation seed")
    p.add_argument("--env", help="override the environment id stored in the checkpoint")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "tsv"], default="tsv")
    p.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="hyperparameter sweeps")
    ssub = sp.add_subparsers(dest="sweep_command", required=True, parser_class=_Parser)
    p = ssub.add_parser("run", help="run or resume a sweep")
    _run_flags(p)
    p.add_argument("--base", help="preset name or config file used as the base run config")
    p.add_argument("--seeds", type=int, help="seeds per trial")
    p.add_argument("--root-seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--stop-after", type=int, help="stop after this many new seed runs")
    p.add_argument("--out", required=True, help="sweep directory")
    p.set_defaults(func=cmd_sweep_run)
    p = ssub.add_parser("export", help="export trial summaries")
    p.add_argument("sweep_dir")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_export)

    p = sub.add_parser("metrics", help="aggregate run summaries into normalized metrics")
    p.add_argument("inputs", nargs="+", help="summary.json files or JSON-lines of summaries")
    p.add_argument("--norm", default="local", help="paper, local, or a task,min,max CSV path")
    p.add_argument("--baseline", help="baseline method for probability of improvement")
    p.add_argument("--bootstrap", type=int, default=metrics.N_BOOTSTRAP)
    p.add_argument("--bootstrap-seed", type=int, default=0)
    p.add_argument("--out", help="metrics JSON path")
    p.add_argument("--format", choices=["tsv", "csv", "json"], default="tsv")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("plot", help="render SVG figures with CSV sidecars")
    p.add_argument("--kind", choices=plotting.KINDS, required=True)
    p.add_argument("input", help="metrics JSON, or a sweep directory for sensitivity plots")
    p.add_argument("--x", help="sweep axis on the horizontal axis")
    p.add_argument("--y", help="second sweep axis (sensitivity-2d)")
    p.add_argument("--norm", default="none", help="sensitivity normalization: none, paper, local or a CSV path")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("presets", help="list presets or emit one")
    p.add_argument("name", nargs="?")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError, OSError, CheckpointFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
