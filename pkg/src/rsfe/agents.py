"""Tabular risk-sensitive learners.

Both learners scale an ordinary TD error ``delta`` by ``2 sigma~_beta(delta)``
before applying it, i.e. the sigmoid factor acts as a per-update learning
rate and never enters a target. With ``beta = 0`` and no floor the factor is
exactly 1 and the updates are the textbook TD(0) / Q-learning ones.

Step sizes follow ``AgentConfig.alpha`` indexed by the visit count of the
updated entry (state for TD(0), state-action pair for Q-learning).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._jit import njit
from .envs import CELL_GOAL, GridIndex, GridWorldConfig, enumerate_mdp
from .estimator import LearningRateSchedule, rate_kernel
from .math_core import check_beta, check_floor, floored_sigmoid_kernel
from .oracle import FiniteMarkovChain

N_ACTIONS = 4
_CHUNK_EPISODES = 2048


@dataclass(frozen=True)
class AgentConfig:
    beta: float = 0.0
    gamma: float = 0.95
    alpha: LearningRateSchedule = LearningRateSchedule.constant(0.1)
    eta: float = 0.0
    floor_warmup_steps: Optional[int] = None
    eps0: float = 1.0
    eps_min: float = 0.05
    decay_fraction: float = 0.5
    episodes: int = 20000
    seed: int = 0

    def __post_init__(self):
        check_beta(self.beta)
        check_floor(self.eta)
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 <= self.eps_min <= self.eps0 <= 1.0:
            raise ValueError("need 0 <= eps_min <= eps0 <= 1")
        if not 0.0 < self.decay_fraction <= 1.0:
            raise ValueError("decay_fraction must lie in (0, 1]")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")

    def epsilon_schedule(self) -> np.ndarray:
        """Per-episode exploration rate: linear decay, then flat at ``eps_min``."""
        k = np.arange(self.episodes, dtype=float)
        horizon = max(1.0, self.decay_fraction * self.episodes)
        return np.maximum(self.eps_min, self.eps0 - (self.eps0 - self.eps_min) * k / horizon)

    def kernel_args(self):
        warmup = -1 if self.floor_warmup_steps is None else int(self.floor_warmup_steps)
        return (float(self.gamma), float(self.beta), float(self.eta), warmup) + self.alpha.params()


# --------------------------------------------------------------------------
# kernels

@njit
def scaled_increment(delta, beta, eta, alpha):
    return 2.0 * alpha * floored_sigmoid_kernel(delta, beta, eta) * delta


@njit
def greedy_action(q_row):
    best = 0
    for a in range(1, q_row.shape[0]):
        if q_row[a] > q_row[best]:
            best = a
    return best


@njit
def train_kernel(Q, counts, move, cell_type, start, wind_prob, step_limit, water_reward, goal_reward,
                 gamma, beta, eta, warmup, code, a, b, p, eps, rand, returns, violations):
    n_episodes = rand.shape[0]
    for ep in range(n_episodes):
        s = start
        ret = 0.0
        discount = 1.0
        n_water = 0
        for t in range(step_limit):
            if rand[ep, t, 0] < eps[ep]:
                act = min(int(rand[ep, t, 1] * 4.0), 3)
            else:
                act = greedy_action(Q[s])
            s1 = move[s, act]
            if rand[ep, t, 2] < wind_prob:
                s1 = move[s1, min(int(rand[ep, t, 3] * 4.0), 3)]
            kind = cell_type[s1]
            r = 0.0
            if kind == 2:
                r = goal_reward
            elif kind == 1:
                r = water_reward
                n_water += 1
            done = kind == 2
            target = r
            if not done:
                target += gamma * Q[s1, greedy_action(Q[s1])]
            delta = target - Q[s, act]
            n = counts[s, act]
            floor = eta if (warmup < 0 or n < warmup) else 0.0
            Q[s, act] += scaled_increment(delta, beta, floor, rate_kernel(code, a, b, p, n))
            counts[s, act] = n + 1
            ret += discount * r
            discount *= gamma
            s = s1
            if done:
                break
        returns[ep] = ret
        violations[ep] = n_water


@njit
def rollout_kernel(Q, move, cell_type, start, wind_prob, step_limit, water_reward, goal_reward,
                   gamma, rand, returns, visits, totals):
    # totals: [water steps, transitions, goals reached]
    for ep in range(rand.shape[0]):
        s = start
        visits[s] += 1.0
        ret = 0.0
        discount = 1.0
        for t in range(step_limit):
            s1 = move[s, greedy_action(Q[s])]
            if rand[ep, t, 0] < wind_prob:
                s1 = move[s1, min(int(rand[ep, t, 1] * 4.0), 3)]
            kind = cell_type[s1]
            r = 0.0
            if kind == 2:
                r = goal_reward
                totals[2] += 1.0
            elif kind == 1:
                r = water_reward
                totals[0] += 1.0
            totals[1] += 1.0
            visits[s1] += 1.0
            ret += discount * r
            discount *= gamma
            s = s1
            if kind == 2:
                break
        returns[ep] = ret


@njit
def td0_chain_kernel(V, counts, cdf, rewards, terminal, restart, s, gamma, beta, eta, warmup,
                     code, a, b, p, rand):
    n = cdf.shape[0]
    for i in range(rand.shape[0]):
        u = rand[i, 0]
        s1 = 0
        while s1 < n - 1 and cdf[s, s1] <= u:
            s1 += 1
        done = terminal[s1]
        target = rewards[s, s1]
        if not done:
            target += gamma * V[s1]
        delta = target - V[s]
        k = counts[s]
        floor = eta if (warmup < 0 or k < warmup) else 0.0
        V[s] += scaled_increment(delta, beta, floor, rate_kernel(code, a, b, p, k))
        counts[s] = k + 1
        if done:
            s = restart[min(int(rand[i, 1] * restart.shape[0]), restart.shape[0] - 1)]
        else:
            s = s1
    return s


# --------------------------------------------------------------------------
# single updates

def td0_step(V: np.ndarray, s: int, r: float, s_next: int, done: bool, cfg: AgentConfig,
             t: int = 0) -> np.ndarray:
    """Risk-sensitive TD(0) update of ``V[s]`` in place; returns ``V``.

    ``t`` indexes the learning-rate schedule.
    """
    delta = r + cfg.gamma * V[s_next] * (1.0 - float(done)) - V[s]
    V[s] += _increment(delta, cfg, t)
    return V


def q_step(Q: np.ndarray, s: int, a: int, r: float, s_next: int, done: bool, cfg: AgentConfig,
           t: int = 0) -> np.ndarray:
    """Risk-sensitive Q-learning update of ``Q[s, a]`` in place; returns ``Q``."""
    delta = r + cfg.gamma * np.max(Q[s_next]) * (1.0 - float(done)) - Q[s, a]
    Q[s, a] += _increment(delta, cfg, t)
    return Q


def _increment(delta, cfg: AgentConfig, t: int) -> float:
    floor = cfg.eta if (cfg.floor_warmup_steps is None or t < cfg.floor_warmup_steps) else 0.0
    return scaled_increment(float(delta), float(cfg.beta), float(floor), cfg.alpha(t))


# --------------------------------------------------------------------------
# gridworld training and evaluation

@dataclass
class TrainingLog:
    returns: np.ndarray
    violations: np.ndarray

    def __len__(self):
        return len(self.returns)


@dataclass
class EvalReport:
    mean_return: float
    violation_fraction: float
    visitation: np.ndarray
    n_rollouts: int
    goal_rate: float = 0.0
    mean_water_distance: float = float("nan")
    visitation_grid: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {"mean_return": self.mean_return, "violation_fraction": self.violation_fraction,
               "visitation": self.visitation.tolist(), "n_rollouts": self.n_rollouts,
               "goal_rate": self.goal_rate, "mean_water_distance": self.mean_water_distance}
        if self.visitation_grid is not None:
            out["visitation_grid"] = self.visitation_grid.tolist()
        return out


def _streams(env: GridWorldConfig, cfg: AgentConfig):
    train_ss, eval_ss = np.random.SeedSequence([int(cfg.seed), int(env.seed)]).spawn(2)
    return np.random.default_rng(train_ss), np.random.default_rng(eval_ss)


def train(env: GridWorldConfig, cfg: AgentConfig):
    """Epsilon-greedy risk-sensitive Q-learning; returns ``(Q, TrainingLog)``.

    Greedy ties go to the lowest action index. Timeouts bootstrap (they are
    truncations, not terminal states).
    """
    index = GridIndex(env.grid)
    Q = np.zeros((index.n_states, N_ACTIONS))
    counts = np.zeros((index.n_states, N_ACTIONS), dtype=np.int64)
    returns = np.zeros(cfg.episodes)
    violations = np.zeros(cfg.episodes, dtype=np.int64)
    eps = cfg.epsilon_schedule()
    rng, _ = _streams(env, cfg)
    for lo in range(0, cfg.episodes, _CHUNK_EPISODES):
        hi = min(lo + _CHUNK_EPISODES, cfg.episodes)
        rand = rng.random((hi - lo, env.step_limit, 4))
        train_kernel(Q, counts, index.move, index.cell_type, index.start, float(env.wind_prob),
                     int(env.step_limit), float(env.water_reward), float(env.goal_reward),
                     *cfg.kernel_args(), eps[lo:hi], rand, returns[lo:hi], violations[lo:hi])
    if not np.all(np.isfinite(Q)):
        raise FloatingPointError(f"non-finite Q values after training with beta={cfg.beta}")
    return Q, TrainingLog(returns, violations)


def greedy_policy(Q: np.ndarray) -> np.ndarray:
    """Argmax action per state, lowest index on ties."""
    return np.argmax(Q, axis=1)


def evaluate(Q: np.ndarray, env: GridWorldConfig, n_rollouts: int = 1000,
             cfg: Optional[AgentConfig] = None) -> EvalReport:
    """Greedy rollouts of ``Q``: mean discounted return, per-step water
    fraction and normalised state-visitation frequencies."""
    cfg = cfg or AgentConfig()
    index = GridIndex(env.grid)
    visits = np.zeros(index.n_states)
    totals = np.zeros(3)
    returns = np.zeros(n_rollouts)
    if n_rollouts > 0:
        _, rng = _streams(env, cfg)
        rand = rng.random((n_rollouts, env.step_limit, 2))
        rollout_kernel(np.ascontiguousarray(Q, dtype=float), index.move, index.cell_type, index.start,
                       float(env.wind_prob), int(env.step_limit), float(env.water_reward),
                       float(env.goal_reward), float(cfg.gamma), rand, returns, visits, totals)
    total_visits = visits.sum()
    freq = visits / total_visits if total_visits > 0 else visits
    dist = index.water_distance()
    return EvalReport(
        mean_return=float(returns.mean()) if n_rollouts else 0.0,
        violation_fraction=float(totals[0] / totals[1]) if totals[1] > 0 else 0.0,
        visitation=freq,
        n_rollouts=n_rollouts,
        goal_rate=float(totals[2] / n_rollouts) if n_rollouts else 0.0,
        mean_water_distance=float(np.dot(freq, dist)) if total_visits > 0 and np.all(np.isfinite(dist)) else float("nan"),
        visitation_grid=index.to_grid(freq),
    )


def greedy_path(Q: np.ndarray, env: GridWorldConfig) -> list:
    """Cells visited by the greedy policy with the wind switched off."""
    index = GridIndex(env.grid)
    s = index.start
    path = [index.cells[s]]
    for _ in range(env.step_limit):
        s = int(index.move[s, greedy_action(Q[s])])
        path.append(index.cells[s])
        if index.cell_type[s] == CELL_GOAL:
            break
    return path


# --------------------------------------------------------------------------
# policy evaluation

def td0_evaluate_chain(chain: FiniteMarkovChain, cfg: AgentConfig, n_steps: int, seed: int = 0,
                       start: int = 0) -> np.ndarray:
    """Run risk-sensitive TD(0) along one trajectory of ``chain``.

    On reaching a terminal state the trajectory restarts from a uniformly
    chosen non-terminal state.
    """
    n = chain.n_states
    V = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    cdf = np.cumsum(chain.kernel, axis=1)
    restart = np.flatnonzero(~chain.terminal)
    if restart.size == 0:
        return V
    rng = np.random.default_rng(seed)
    s = int(start)
    gamma = float(chain.gamma)
    _, beta, eta, warmup, code, a, b, p = cfg.kernel_args()
    remaining = int(n_steps)
    while remaining > 0:
        m = min(remaining, 1 << 18)
        rand = rng.random((m, 2))
        s = td0_chain_kernel(V, counts, cdf, chain.reward_matrix, chain.terminal, restart, s, gamma,
                             beta, eta, warmup, code, a, b, p, rand)
        remaining -= m
    return V


def td0_evaluate_policy(env: GridWorldConfig, policy, cfg: AgentConfig, n_steps: int,
                        seed: int = 0) -> np.ndarray:
    """TD(0) values of a stationary gridworld policy.

    Trajectories are drawn from the exact induced chain (see
    :func:`rsfe.envs.enumerate_mdp`), starting at the map's start cell.
    """
    mdp = enumerate_mdp(env, cfg.gamma)
    chain = mdp.induced_chain(policy)
    return td0_evaluate_chain(chain, cfg, n_steps, seed, start=mdp.index.start)
