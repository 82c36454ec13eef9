"""The four desk-scale tasks.

chain-mdp
    States 0..N-1 (N=5) on a line, one-hot observations, actions
    {0: left, 1: right}.  Every episode starts in state 0.  Moving left from 0
    stays at 0.  Entering state N-1 pays reward 1 and terminates; every other
    transition pays 0.  Episodes are cut at 20 steps.

cartpole-discrete
    Cart-pole balancing with Euler integration: gravity 9.8, cart mass 1.0,
    pole mass 0.1, pole half-length 0.5, push force 10.0, dt 0.02.  Actions
    {0: push left, 1: push right}.  Reward 1 per step; terminates when
    |x| > 2.4 or |angle| > 12 degrees; cut at 500 steps.  Initial state
    components uniform in [-0.05, 0.05].

pendulum-continuous
    Torque-controlled pendulum swing-up: g 10, mass 1, length 1, dt 0.05,
    speed limit 8, torque in [-2, 2].  Observation (cos, sin, angular velocity);
    reward -(angle^2 + 0.1 velocity^2 + 0.001 torque^2) with the angle wrapped
    to [-pi, pi).  Never terminates; cut at 200 steps.  Initial angle uniform
    in [-pi, pi), velocity uniform in [-1, 1].

maze-grid
    A fixed 5x5 grid (``MAZE_ROWS``), one-hot position observations, actions
    {0: up, 1: right, 2: down, 3: left}.  Moving into a wall or off the grid
    leaves the agent in place.  Reaching the goal pays 1 and terminates;
    everything else pays 0.  Cut at 50 steps.  The start cell is uniform over
    free non-goal cells: ``floor(u * n_free)`` indexes them in row-major order.
"""

from __future__ import annotations

import math

import numpy as np

from .base import Env, EnvSpec


class ChainMDP(Env):
    def __init__(self, n: int = 5, max_steps: int = 20):
        self.n = n
        self.spec = EnvSpec("chain-mdp", n, "discrete", 2, max_steps, (0.0, 1.0))

    def initial(self, streams, n):
        return np.zeros((n, 1))

    def dynamics(self, phys, actions, streams):
        pos = phys[:, 0] + np.where(actions == 1, 1.0, -1.0)
        pos = np.clip(pos, 0.0, self.n - 1)
        goal = pos == self.n - 1
        return pos[:, None], goal.astype(np.float64), goal

    def observe(self, phys):
        return np.eye(self.n)[phys[:, 0].astype(np.int64)]

    def optimal_return(self, gamma: float = 1.0) -> float:
        """Finite-horizon value iteration from the start state."""
        v = np.zeros(self.n)  # value with k steps to go
        for _ in range(self.spec.max_episode_steps):
            new = np.empty(self.n)
            for s in range(self.n):
                if s == self.n - 1:
                    new[s] = 0.0
                    continue
                best = -np.inf
                for step in (-1, 1):
                    nxt = min(max(s + step, 0), self.n - 1)
                    r = 1.0 if nxt == self.n - 1 else 0.0
                    best = max(best, r + (0.0 if nxt == self.n - 1 else gamma * v[nxt]))
                new[s] = best
            v = new
        return float(v[0])


class CartPole(Env):
    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5
    force_mag = 10.0
    tau = 0.02
    x_threshold = 2.4
    theta_threshold = 12 * 2 * math.pi / 360

    def __init__(self, max_steps: int = 500):
        self.spec = EnvSpec("cartpole-discrete", 4, "discrete", 2, max_steps, (0.0, float(max_steps)))

    def initial(self, streams, n):
        return streams.uniform_block(4) * 0.1 - 0.05

    def dynamics(self, phys, actions, streams):
        x, x_dot, theta, theta_dot = phys.T
        force = np.where(actions == 1, self.force_mag, -self.force_mag)
        cos, sin = np.cos(theta), np.sin(theta)
        total_mass = self.masspole + self.masscart
        pml = self.masspole * self.length
        temp = (force + pml * theta_dot**2 * sin) / total_mass
        theta_acc = (self.gravity * sin - cos * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * cos**2 / total_mass)
        )
        x_acc = temp - pml * theta_acc * cos / total_mass
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * x_acc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * theta_acc
        new = np.stack([x, x_dot, theta, theta_dot], axis=-1)
        terminated = (np.abs(x) > self.x_threshold) | (np.abs(theta) > self.theta_threshold)
        return new, np.ones(len(phys)), terminated

    def observe(self, phys):
        return phys.copy()


class Pendulum(Env):
    g = 10.0
    m = 1.0
    l = 1.0
    dt = 0.05
    max_speed = 8.0
    max_torque = 2.0

    def __init__(self, max_steps: int = 200):
        worst = -(math.pi**2 + 0.1 * 64 + 0.001 * 4)
        self.spec = EnvSpec(
            "pendulum-continuous", 3, "box", 1, max_steps, (worst * max_steps, 0.0), -2.0, 2.0
        )

    def initial(self, streams, n):
        u = streams.uniform_block(2)
        return np.stack([u[:, 0] * 2 * math.pi - math.pi, u[:, 1] * 2.0 - 1.0], axis=-1)

    def dynamics(self, phys, actions, streams):
        th, thdot = phys.T
        u = actions[:, 0]
        wrapped = ((th + math.pi) % (2 * math.pi)) - math.pi
        cost = wrapped**2 + 0.1 * thdot**2 + 0.001 * u**2
        thdot = thdot + (3 * self.g / (2 * self.l) * np.sin(th) + 3.0 / (self.m * self.l**2) * u) * self.dt
        thdot = np.clip(thdot, -self.max_speed, self.max_speed)
        th = th + thdot * self.dt
        return np.stack([th, thdot], axis=-1), -cost, np.zeros(len(phys), dtype=bool)

    def observe(self, phys):
        return np.stack([np.cos(phys[:, 0]), np.sin(phys[:, 0]), phys[:, 1]], axis=-1)


MAZE_ROWS = (
    "...#G",
    ".#.#.",
    ".#...",
    ".###.",
    ".....",
)

_MOVES = np.array([[-1, 0], [0, 1], [1, 0], [0, -1]])


class MazeGrid(Env):
    def __init__(self, rows=MAZE_ROWS, max_steps: int = 50):
        self.rows = tuple(rows)
        self.h, self.w = len(rows), len(rows[0])
        self.walls = np.array([[c == "#" for c in r] for r in rows])
        goal = [(i, j) for i, r in enumerate(rows) for j, c in enumerate(r) if c == "G"]
        self.goal = goal[0]
        self.free_starts = np.array(
            [(i, j) for i in range(self.h) for j in range(self.w) if not self.walls[i, j] and (i, j) != self.goal],
            dtype=np.float64,
        )
        self.spec = EnvSpec("maze-grid", self.h * self.w, "discrete", 4, max_steps, (0.0, 1.0))

    def initial(self, streams, n):
        u = streams.uniform()
        idx = np.minimum((u * len(self.free_starts)).astype(np.int64), len(self.free_starts) - 1)
        return self.free_starts[idx].copy()

    def dynamics(self, phys, actions, streams):
        pos = phys.astype(np.int64)
        target = pos + _MOVES[actions]
        inside = (target[:, 0] >= 0) & (target[:, 0] < self.h) & (target[:, 1] >= 0) & (target[:, 1] < self.w)
        tr = np.clip(target[:, 0], 0, self.h - 1)
        tc = np.clip(target[:, 1], 0, self.w - 1)
        ok = inside & ~self.walls[tr, tc]
        pos = np.where(ok[:, None], target, pos)
        goal = (pos[:, 0] == self.goal[0]) & (pos[:, 1] == self.goal[1])
        return pos.astype(np.float64), goal.astype(np.float64), goal

    def observe(self, phys):
        flat = phys[:, 0].astype(np.int64) * self.w + phys[:, 1].astype(np.int64)
        return np.eye(self.h * self.w)[flat]
