"""Acceptance criteria 1-9.

Each test prints exactly one ``ACCEPTANCE <n>: PASS|FAIL`` line with the
measured quantities, then asserts.  Run with ``pytest tests/test_acceptance.py``
(output capture is disabled in the project's pytest settings, so the lines
appear in the log).
"""

import json
import os
import signal
import subprocess
import sys
import time

import numpy as np
import pytest

import oracles
from outerppo import checkpoint, presets
from outerppo.agent import ActorCritic
from outerppo.cli import main
from outerppo.config import resolve
from outerppo.driver import train
from outerppo.envs import REGISTRY, ChainMDP, EnvSpec, make_env
from outerppo.heads import log_prob_and_entropy
from outerppo.losses import clipped_policy_loss, clipped_value_loss, nonzero_gradient_indicator
from outerppo.metrics import (
    ScoreMatrix,
    aggregate_point_estimates,
    iqm,
    normalize,
    performance_profile,
    probability_of_improvement,
)
from outerppo.params import ParamVector
from outerppo.plotting import plot_sensitivity_1d
from outerppo.rollout import compute_gae
from outerppo.sweep import SweepSpec, run_sweep


def report(n, ok, detail):
    print(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


# -- 1. reduction identities -------------------------------------------------------

SMALL_RUN = [
    "--budget", "384", "--envs", "4",
    "--set", "ppo.rollout_length=32", "--set", "ppo.num_epochs=2", "--set", "ppo.num_minibatches=4",
    "--set", "network.hidden=[16,16]", "--set", "num_intermediate_evals=3",
    "--set", "eval_episodes=4", "--set", "absolute_eval_episodes=8",
]


def _strip_strategy(meta):
    """Drop the fields whose only job is to name the outer strategy and its state."""
    meta = json.loads(json.dumps(meta))
    if "config" in meta:
        meta["config"].pop("outer")
    meta.pop("outer", None)
    for e in meta.get("events", []):
        e.pop("momentum_norm", None)
    return meta


def _run_dir_fingerprint(d):
    cfg = json.loads((d / "resolved-config.json").read_text())
    cfg.pop("outer")
    events = [json.loads(line) for line in (d / "events.jsonl").read_text().splitlines()]
    for e in events:
        e.pop("momentum_norm", None)
    summary = json.loads((d / "summary.json").read_text())
    summary.pop("method")
    ckpts = {}
    for name in ("best.ckpt", "final.ckpt"):
        arrays, meta = checkpoint.load(d / name)
        arrays.pop("outer/momentum", None)
        ckpts[name] = ({k: (v.dtype.str, v.shape, v.tobytes()) for k, v in arrays.items()}, _strip_strategy(meta))
    return cfg, events, summary, ckpts


def test_acceptance_1_reduction_identities(tmp_path):
    pairs = [
        (["--outer", "lr", "--sigma", "1.0"], ["--outer", "standard"]),
        (["--outer", "nesterov", "--mu", "0.0", "--sigma", "0.7"], ["--outer", "lr", "--sigma", "0.7"]),
        (["--outer", "biased", "--alpha", "0.0", "--mu", "0.5"], ["--outer", "standard"]),
    ]
    t0 = time.perf_counter()
    failures = []
    checked = 0
    cache = {}

    def run(env, seed, flags):
        key = (env, seed, tuple(flags))
        if key not in cache:
            out = tmp_path / f"{env}-{seed}-{len(cache)}"
            code = main(["-q", "train", "--env", env, "--seed", str(seed), *SMALL_RUN, "--budget", "2048", *flags, "--out", str(out)])
            assert code == 0
            cache[key] = out
        return cache[key]

    for env in sorted(REGISTRY):
        for seed in (0, 1, 2):
            for a, b in pairs:
                da, db = run(env, seed, a), run(env, seed, b)
                fa, fb = _run_dir_fingerprint(da), _run_dir_fingerprint(db)
                digests_a = [e["theta_digest"] for e in fa[1] if e["event"] == "iteration"]
                digests_b = [e["theta_digest"] for e in fb[1] if e["event"] == "iteration"]
                checked += 1
                if fa != fb or digests_a != digests_b or not digests_a:
                    failures.append((env, seed, " ".join(a), " ".join(b)))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed <= 300
    report(1, ok, f"{checked} pairs over {len(REGISTRY)} envs x 3 seeds, {len(failures)} mismatches {failures[:3]}, {elapsed:.1f}s (limit 300s)")


# -- 2. gradient correctness -------------------------------------------------------

FD_STEP = 1e-6
BOUNDARY = 1e-6


def _toy_agent(rng, kind):
    obs_dim, n_act = int(rng.integers(2, 5)), int(rng.integers(2, 4))
    hidden = tuple(int(h) for h in rng.integers(3, 7, size=rng.integers(1, 3)))
    if kind == "categorical":
        spec = EnvSpec("toy", obs_dim, "discrete", n_act, 10, (0.0, 1.0))
    else:
        spec = EnvSpec("toy", obs_dim, "box", n_act, 10, (0.0, 1.0), -1.0, 1.0)
    act = "tanh" if rng.random() < 0.5 else "relu"
    return ActorCritic.for_env(spec, hidden, act), obs_dim, n_act


def _fd(f, x, h=FD_STEP):
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def _rel_err(a, n):
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), 1e-12))


def _relu_kink(net, tape):
    """True when a hidden relu pre-activation sits close enough to 0 for the FD stencil to cross it."""
    return net.activation == "relu" and any(np.min(np.abs(z)) < 1e-4 for z in tape.pre)


def _policy_instance(rng):
    kind = "categorical" if rng.random() < 0.5 else "gaussian"
    agent, obs_dim, n_act = _toy_agent(rng, kind)
    b = int(rng.integers(1, 9))
    layout = agent.actor_layout()
    actor = ParamVector(rng.normal(scale=0.5, size=layout.size), layout)
    obs = rng.normal(size=(b, obs_dim))
    dist, _ = agent.dist_params(actor, obs)
    actions = rng.integers(n_act, size=b) if kind == "categorical" else rng.normal(size=(b, n_act))
    logp, _, _ = log_prob_and_entropy(agent.head, dist, actions)
    old = logp + rng.normal(scale=0.3, size=b)
    adv = rng.normal(size=b)
    eps = float(rng.uniform(0.1, 0.3))
    ratio = np.exp(logp - old)
    near = min(np.min(np.abs(ratio - (1 - eps))), np.min(np.abs(ratio - (1 + eps))))
    return agent, actor, obs, actions, old, adv, eps, near


def _value_instance(rng):
    agent, obs_dim, _ = _toy_agent(rng, "categorical")
    b = int(rng.integers(1, 9))
    layout = agent.critic_layout()
    critic = ParamVector(rng.normal(scale=0.5, size=layout.size), layout)
    obs = rng.normal(size=(b, obs_dim))
    v, _ = agent.values(critic, obs)
    prev = v + rng.normal(scale=0.3, size=b)
    target = v + rng.normal(size=b)
    eps = float(rng.uniform(0.1, 0.3))
    # kinks: the clip band edges and the points where the two squared errors swap order
    kinks = np.concatenate([prev - eps, prev + eps, 2 * target - (prev - eps), 2 * target - (prev + eps)])
    near = float(np.min(np.abs(np.tile(v, 4) - kinks)))
    return agent, critic, obs, target, prev, eps, near


def test_acceptance_2_gradient_correctness():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst_p = worst_v = 0.0
    excluded = 0
    n_policy = n_value = 0
    while n_policy < 200:
        agent, actor, obs, actions, old, adv, eps, near = _policy_instance(rng)
        if near <= BOUNDARY or _relu_kink(agent.actor, agent.dist_params(actor, obs)[1]):
            excluded += 1
            continue
        _, grad, _ = clipped_policy_loss(agent, actor, obs, actions, old, adv, eps)
        f = lambda x: clipped_policy_loss(agent, ParamVector(x, actor.layout), obs, actions, old, adv, eps)[0]  # noqa: E731
        worst_p = max(worst_p, _rel_err(grad.data, _fd(f, actor.data)))
        n_policy += 1
    while n_value < 200:
        agent, critic, obs, target, prev, eps, near = _value_instance(rng)
        if near <= BOUNDARY or _relu_kink(agent.critic, agent.values(critic, obs)[1]):
            excluded += 1
            continue
        _, grad = clipped_value_loss(agent, critic, obs, target, prev, eps)
        f = lambda x: clipped_value_loss(agent, ParamVector(x, critic.layout), obs, target, prev, eps)[0]  # noqa: E731
        worst_v = max(worst_v, _rel_err(grad.data, _fd(f, critic.data)))
        n_value += 1
    elapsed = time.perf_counter() - t0
    ok = worst_p < 1e-4 and worst_v < 1e-4 and elapsed <= 60
    report(2, ok, f"200 policy + 200 value instances, max rel err policy {worst_p:.2e} value {worst_v:.2e} "
                  f"(limit 1e-4), {excluded} near-boundary draws excluded, {elapsed:.1f}s (limit 60s)")


# -- 3. non-zero gradient indicator ------------------------------------------------


def test_acceptance_3_indicator_consistency():
    rng = np.random.default_rng(3)
    mismatches = 0
    active = 0
    for _ in range(1000):
        kind = "categorical" if rng.random() < 0.5 else "gaussian"
        agent, obs_dim, n_act = _toy_agent(rng, kind)
        layout = agent.actor_layout()
        actor = ParamVector(rng.normal(scale=0.5, size=layout.size), layout)
        obs = rng.normal(size=(1, obs_dim))
        dist, _ = agent.dist_params(actor, obs)
        actions = rng.integers(n_act, size=1) if kind == "categorical" else rng.normal(size=(1, n_act))
        logp, _, _ = log_prob_and_entropy(agent.head, dist, actions)
        old = logp + rng.normal(scale=0.4, size=1)
        adv = rng.normal(size=1)
        eps = float(rng.uniform(0.1, 0.3))
        _, grad, _ = clipped_policy_loss(agent, actor, obs, actions, old, adv, eps)
        nonzero = bool(np.max(np.abs(grad.data)) > 1e-12)
        ind = bool(nonzero_gradient_indicator(float(np.exp(logp - old)[0]), float(adv[0]), eps))
        active += ind
        mismatches += nonzero != ind
    report(3, mismatches == 0, f"1000 samples, {active} with non-zero gradient, {mismatches} disagreements (zero tol 1e-12)")


# -- 4. GAE oracle -------------------------------------------------------------------


def test_acceptance_4_gae_oracle():
    rng = np.random.default_rng(4)
    worst = 0.0
    collapse_ok = True
    for _ in range(500):
        t, n = int(rng.integers(1, 33)), int(rng.integers(1, 5))
        b = oracles.random_batch(rng, t, n)
        gamma, lam = float(rng.uniform(0.8, 1.0)), float(rng.uniform(0.0, 1.0))
        worst = max(worst, float(np.max(np.abs(compute_gae(b, gamma, lam).advantages - oracles.brute_force_gae(b, gamma, lam)))))
        collapse_ok &= np.array_equal(compute_gae(b, gamma, 0.0).advantages, oracles.brute_force_gae(b, gamma, 0.0))
        collapse_ok &= np.array_equal(compute_gae(b, 0.0, lam).advantages, b.rewards - b.values)
    report(4, worst <= 1e-10 and collapse_ok, f"500 batches, max abs err {worst:.2e} (limit 1e-10), lambda=0 / gamma=0 exact: {collapse_ok}")


# -- 5. desk-scale learning --------------------------------------------------------


@pytest.mark.slow
def test_acceptance_5_desk_scale_learning():
    t0 = time.perf_counter()
    chain = ChainMDP()
    chain_opt = oracles.chain_value_iteration(chain, chain.spec.max_episode_steps)
    cart_max = float(make_env("cartpole-discrete").spec.max_episode_steps)
    results = {}
    for preset, target in (("chain-mdp", 0.95 * chain_opt), ("cartpole-discrete", 0.90 * cart_max)):
        base = presets.get(preset)
        scores = []
        for seed in range(1, 6):
            res = train(resolve(base, [("seed", seed)]))
            assert res.summary()["transitions"] <= base["total_transitions"]
            scores.append(res.absolute_mean if res.completed else float("nan"))
        hits = sum(s >= target for s in scores)
        results[preset] = (hits, target, scores)
    elapsed = time.perf_counter() - t0
    ok = all(h >= 4 for h, _, _ in results.values()) and elapsed <= 900
    detail = "; ".join(f"{p}: {h}/5 seeds >= {t:g} (returns {[round(s, 3) for s in sc]})" for p, (h, t, sc) in results.items())
    report(5, ok, f"{detail}; {elapsed:.0f}s (limit 900s)")


# -- 6. outer learning rate sweep ------------------------------------------------


@pytest.mark.slow
def test_acceptance_6_outer_lr_sweep(tmp_path):
    t0 = time.perf_counter()
    spec = SweepSpec(
        base=presets.get("cartpole-small-clip"),
        axes=[("outer.strategy", ["lr"]), ("outer.sigma", [0.5, 1.0, 1.5, 2.0])],
        seeds_per_trial=8,
        objective="absolute_mean",
        root_seed=6,
    )
    result = run_sweep(spec, tmp_path / "sweep.jsonl")
    by_sigma = {t["params"]["outer.sigma"]: t for t in result.trials}
    base = by_sigma[1.0]
    threshold = base["objective"] - base["stderr"]
    others = {s: t["objective"] for s, t in by_sigma.items() if s != 1.0 and t["objective"] is not None}
    xs = sorted(by_sigma)
    svg, csv_path = plot_sensitivity_1d(xs, [by_sigma[s]["objective"] for s in xs], [by_sigma[s]["stderr"] for s in xs],
                                        "outer.sigma", tmp_path / "fig" / "sigma-sweep", "mean return")
    elapsed = time.perf_counter() - t0
    ok = result.complete and any(v >= threshold for v in others.values()) and svg.exists() and csv_path.exists() and elapsed <= 1800
    means = ", ".join(f"sigma={s:g}: {by_sigma[s]['objective']:.1f}+-{by_sigma[s]['stderr']:.1f}" for s in xs)
    report(6, ok, f"{means}; sigma=1 mean - 1 se = {threshold:.1f}; figure rendered; {elapsed:.0f}s (limit 1800s)")


# -- 7. metrics oracle -------------------------------------------------------------


def test_acceptance_7_metrics_oracle():
    fx = oracles.fixture_4x8()
    other = oracles.shifted(fx, -0.0625)
    x = ScoreMatrix("x", fx)
    y = ScoreMatrix("y", other)
    checks = {}
    agg = aggregate_point_estimates(x, reps=500, seed=7)
    checks["point estimates"] = all(agg[k]["estimate"] == fn(oracles.pooled(fx)) for k, fn in oracles.ESTIMATORS.items())
    # interval endpoints are interpolated percentiles, so they are compared to rounding only
    checks["bootstrap intervals (1e-12)"] = all(
        np.allclose((agg[k]["ci_low"], agg[k]["ci_high"]), oracles.bootstrap_ci(fx, fn, 500, 7 + i), rtol=0, atol=1e-12)
        for i, (k, fn) in enumerate(oracles.ESTIMATORS.items())
    )
    checks["poi"] = probability_of_improvement(x, y, reps=200)["estimate"] == oracles.poi(fx, other)
    taus = [i / 64 for i in range(-32, 97)]
    checks["profile"] = performance_profile(x, taus).tolist() == oracles.profile(fx, taus)
    checks["poi(X,X)=0.5"] = probability_of_improvement(x, x, reps=200)["estimate"] == 0.5
    checks["iqm(1..8)=4.5"] = iqm(np.arange(1, 9)) == 4.5
    hop = normalize(ScoreMatrix("h", {"hopper": [21.03, 3697.39]}), presets.paper_normalization()).scores["hopper"]
    checks["hopper->(0,1)"] = hop.tolist() == [0.0, 1.0]
    failed = [k for k, v in checks.items() if not v]
    report(7, not failed, f"{len(checks)} checks ({', '.join(checks)}), failed: {failed or 'none'}")


# -- 8. preset fixtures ------------------------------------------------------------


def test_acceptance_8_preset_round_trip(tmp_path):
    table_names = [n for n in presets.names() if presets.kind(n) == "partial-run"]
    bad = []
    for name in table_names:
        assert main(["presets", name, "--out", str(tmp_path / f"{name}.json")]) == 0
        text = (tmp_path / f"{name}.json").read_text()
        tree = json.loads(text)
        if presets.dumps(tree) != text or tree != presets.get(name):
            bad.append(name)
            continue
        # the tree is also a valid run config whose values survive a resolve/serialize/reload cycle
        cfg = resolve(tree)
        again = resolve(json.loads(cfg.to_json()))
        if again.to_json() != cfg.to_json() or cfg.ppo.actor_lr != tree["ppo"]["actor_lr"]:
            bad.append(name)
    sizes = {n: len(SweepSpec.from_dict(presets.get(n)).assignments()) for n in ("outer-lr-grid", "nesterov-grid", "biased-grid")}
    ok = not bad and len(table_names) == 56 and sizes == {"outer-lr-grid": 40, "nesterov-grid": 90, "biased-grid": 100}
    report(8, ok, f"{len(table_names)} task presets round-tripped byte-identically ({len(bad)} failures {bad[:3]}); grid sizes {sizes}")


# -- 9. reproducibility ------------------------------------------------------------

SWEEP_RUN = [
    "--env", "chain-mdp", "--budget", "2560", "--envs", "4",
    "--set", "ppo.rollout_length=32", "--set", "network.hidden=[16,16]",
    "--set", "eval_episodes=8", "--set", "absolute_eval_episodes=16",
]


def _cli(*args):
    env = dict(os.environ)
    return [sys.executable, "-m", "outerppo.cli", "-q", *args], env


def test_acceptance_9_reproducibility(tmp_path):
    # (a) every resolved config replays to identical files
    replay_ok = True
    for env in sorted(REGISTRY):
        a, b = tmp_path / f"{env}-a", tmp_path / f"{env}-b"
        assert main(["-q", "train", "--env", env, "--seed", "9", "--outer", "nesterov", "--sigma", "0.8", "--mu", "0.4",
                     *SMALL_RUN, "--out", str(a)]) == 0
        assert main(["-q", "train", "--config", str(a / "resolved-config.json"), "--out", str(b)]) == 0
        for f in ("resolved-config.json", "events.jsonl", "summary.json", "best.ckpt", "final.ckpt"):
            replay_ok &= (a / f).read_bytes() == (b / f).read_bytes()

    # (b) a sweep killed mid-run and resumed matches an uninterrupted sweep
    spec = {"base": {}, "axes": [["outer.strategy", ["lr"]], ["outer.sigma", [0.5, 1.0, 2.0]]], "seeds_per_trial": 3}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    sweep_args = ["sweep", "run", "--config", str(tmp_path / "spec.json"), *SWEEP_RUN]
    cmd, env = _cli(*sweep_args, "--out", str(tmp_path / "full"))
    subprocess.run(cmd, env=env, check=True)
    full = (tmp_path / "full" / "sweep.jsonl").read_bytes()

    cmd, env = _cli(*sweep_args, "--out", str(tmp_path / "killed"))
    proc = subprocess.Popen(cmd, env=env)
    log = tmp_path / "killed" / "sweep.jsonl"
    while proc.poll() is None:
        if log.exists() and log.read_bytes().count(b"\n") >= 3:
            proc.send_signal(signal.SIGKILL)
            break
        time.sleep(0.005)
    proc.wait()
    at_kill = log.read_bytes() if log.exists() else b""
    interrupted = proc.returncode == -signal.SIGKILL and at_kill != full
    cmd, env = _cli(*sweep_args, "--out", str(tmp_path / "killed"))
    subprocess.run(cmd, env=env, check=True)
    resumed = log.read_bytes()
    resume_ok = interrupted and resumed == full and full.startswith(at_kill[: at_kill.rfind(b"\n") + 1])
    n_kill, n_full = at_kill.count(b"\n"), full.count(b"\n")
    report(9, replay_ok and resume_ok,
           f"resolved-config replay identical on {len(REGISTRY)} envs: {replay_ok}; sweep killed after "
           f"{n_kill} of {n_full} log records (SIGKILL: {interrupted}), resumed log identical: {resumed == full}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
