"""Sample sources and the windy gridworld.

Map legend: ``#`` wall, ``.`` floor, ``S`` start, ``G`` goal (terminal),
``W`` water. Each step applies the chosen move, then with probability
``wind_prob`` a push in a uniformly random cardinal direction. Both moves are
blocked by walls. The reward depends on the cell reached after the wind:
``goal_reward`` on a goal (episode ends), ``water_reward`` on water, else 0.
Episodes are also cut after ``step_limit`` steps.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import Optional

import numpy as np

from .math_core import GaussianSpec, UniformSpec
from .oracle import FiniteDiscrete, FiniteMarkovChain

DEFAULT_MAP = """\
##########
#........#
#........#
#........#
#S......G#
#WWWWWWWW#
##########
"""

CELL_FLOOR, CELL_WATER, CELL_GOAL = 0, 1, 2


class Action(IntEnum):
    NORTH = 0
    SOUTH = 1
    EAST = 2
    WEST = 3


# (drow, dcol) per action; wind directions use the same table
MOVES = np.array([(-1, 0), (1, 0), (0, 1), (0, -1)], dtype=np.int64)


class MapError(ValueError):
    pass


# --------------------------------------------------------------------------
# sample sources

@dataclass(frozen=True)
class SampleSource:
    density: object
    seed: int = 0

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def draw(source: SampleSource, n: int) -> np.ndarray:
    """``n`` i.i.d. draws, fully determined by ``source.seed``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = source.rng()
    d = source.density
    if isinstance(d, GaussianSpec):
        return d.mu + d.sd * rng.standard_normal(n)
    if isinstance(d, UniformSpec):
        return d.lo + (d.hi - d.lo) * rng.random(n)
    if isinstance(d, FiniteDiscrete):
        return d.xs[rng.choice(len(d.points), size=n, p=d.ps)]
    raise TypeError(f"cannot sample from {type(d).__name__}")


def density_from_dict(d: dict):
    kind = d.get("kind", "").lower()
    if kind == "gaussian":
        return GaussianSpec(float(d.get("mu", 0.0)), float(d.get("rho", 1.0)))
    if kind == "uniform":
        return UniformSpec(float(d["lo"]), float(d["hi"]))
    if kind in ("discrete", "finite_discrete"):
        return FiniteDiscrete(tuple(tuple(p) for p in d["points"]))
    raise ValueError(f"unknown density kind {d.get('kind')!r}")


def density_to_dict(density) -> dict:
    if isinstance(density, GaussianSpec):
        return {"kind": "gaussian", "mu": density.mu, "rho": density.rho}
    if isinstance(density, UniformSpec):
        return {"kind": "uniform", "lo": density.lo, "hi": density.hi}
    return {"kind": "discrete", "points": [list(p) for p in density.points]}


def density_label(density) -> str:
    if isinstance(density, GaussianSpec):
        return f"gaussian({density.mu:g},{density.rho:g})"
    if isinstance(density, UniformSpec):
        return f"uniform({density.lo:g},{density.hi:g})"
    return "discrete"


# --------------------------------------------------------------------------
# gridworld

@dataclass(frozen=True)
class GridMap:
    rows: tuple

    @property
    def shape(self):
        return len(self.rows), len(self.rows[0])

    def cells(self, char: str):
        return [(r, c) for r, row in enumerate(self.rows) for c, ch in enumerate(row) if ch == char]


def parse_map(text: str) -> GridMap:
    """Validate an ASCII map: rectangular, walled border, one start, a goal,
    and every open cell reachable from the start."""
    rows = [line.rstrip("\r") for line in text.strip("\n").split("\n")]
    rows = [r for r in rows if r]
    if not rows:
        raise MapError("empty map")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise MapError(f"row {i} has length {len(row)}, expected {width}")
        for j, ch in enumerate(row):
            if ch not in "#.SGW":
                raise MapError(f"unknown character {ch!r} at row {i}, col {j}")
    for i, row in enumerate(rows):
        for j, ch in enumerate(row):
            on_border = i in (0, len(rows) - 1) or j in (0, width - 1)
            if on_border and ch != "#":
                raise MapError(f"open border cell at row {i}, col {j}")
    gm = GridMap(tuple(rows))
    starts = gm.cells("S")
    if len(starts) != 1:
        raise MapError(f"expected exactly one 'S', found {len(starts)}")
    if not gm.cells("G"):
        raise MapError("missing goal 'G'")
    seen = {starts[0]}
    queue = deque(seen)
    while queue:
        r, c = queue.popleft()
        for dr, dc in MOVES:
            nxt = (r + int(dr), c + int(dc))
            if rows[nxt[0]][nxt[1]] != "#" and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    for i, row in enumerate(rows):
        for j, ch in enumerate(row):
            if ch != "#" and (i, j) not in seen:
                raise MapError(f"cell at row {i}, col {j} is unreachable from the start")
    return gm


@dataclass(frozen=True)
class GridWorldConfig:
    grid: GridMap = field(default_factory=lambda: parse_map(DEFAULT_MAP))
    wind_prob: float = 0.5
    step_limit: int = 25
    water_reward: float = -1.0
    goal_reward: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.wind_prob <= 1.0:
            raise ValueError("wind_prob must lie in [0, 1]")
        if self.step_limit < 1:
            raise ValueError("step_limit must be >= 1")

    @classmethod
    def from_dict(cls, d: dict, base_dir: Optional[Path] = None) -> "GridWorldConfig":
        grid = parse_map(DEFAULT_MAP)
        if d.get("map_path"):
            path = Path(d["map_path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            grid = parse_map(path.read_text())
        known = {"map_path", "wind_prob", "step_limit", "water_reward", "goal_reward", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown environment config keys: {sorted(unknown)}")
        return cls(grid=grid, wind_prob=float(d.get("wind_prob", 0.5)),
                   step_limit=int(d.get("step_limit", 25)),
                   water_reward=float(d.get("water_reward", -1.0)),
                   goal_reward=float(d.get("goal_reward", 1.0)), seed=int(d.get("seed", 0)))

    @classmethod
    def from_json(cls, path) -> "GridWorldConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def to_dict(self) -> dict:
        return {"map": "\n".join(self.grid.rows), "wind_prob": self.wind_prob,
                "step_limit": self.step_limit, "water_reward": self.water_reward,
                "goal_reward": self.goal_reward, "seed": self.seed}


@dataclass(frozen=True)
class GridState:
    position: tuple
    steps_elapsed: int = 0
    terminated: bool = False
    violation_count: int = 0


class GridIndex:
    """Integer encoding of the open cells of a map, plus move tables.

    ``move[s, a]`` is the cell reached by a wall-blocked move from ``s``;
    wind pushes use the same table.
    """

    def __init__(self, grid: GridMap):
        self.grid = grid
        self.cells = [(r, c) for r, row in enumerate(grid.rows) for c, ch in enumerate(row) if ch != "#"]
        self.index = {cell: i for i, cell in enumerate(self.cells)}
        n = len(self.cells)
        self.cell_type = np.zeros(n, dtype=np.int64)
        self.move = np.zeros((n, 4), dtype=np.int64)
        for s, (r, c) in enumerate(self.cells):
            ch = grid.rows[r][c]
            self.cell_type[s] = CELL_WATER if ch == "W" else CELL_GOAL if ch == "G" else CELL_FLOOR
            for a, (dr, dc) in enumerate(MOVES):
                nxt = (r + int(dr), c + int(dc))
                self.move[s, a] = self.index.get(nxt, s)
        self.start = self.index[grid.cells("S")[0]]

    @property
    def n_states(self) -> int:
        return len(self.cells)

    def to_grid(self, values: np.ndarray, fill=0.0) -> np.ndarray:
        """Scatter per-state values onto a rows x cols array."""
        out = np.full(self.grid.shape, fill, dtype=float)
        for s, (r, c) in enumerate(self.cells):
            out[r, c] = values[s]
        return out

    def water_distance(self) -> np.ndarray:
        """Manhattan distance from each open cell to the nearest water cell."""
        water = [self.cells[s] for s in np.flatnonzero(self.cell_type == CELL_WATER)]
        if not water:
            return np.full(self.n_states, np.inf)
        w = np.array(water)
        pos = np.array(self.cells)
        return np.abs(pos[:, None, :] - w[None, :, :]).sum(axis=2).min(axis=1).astype(float)

    def shortest_path_length(self) -> int:
        """Fewest moves from start to any goal ignoring wind (BFS)."""
        dist = {self.start: 0}
        queue = deque([self.start])
        while queue:
            s = queue.popleft()
            if self.cell_type[s] == CELL_GOAL:
                return dist[s]
            for a in range(4):
                t = int(self.move[s, a])
                if t not in dist:
                    dist[t] = dist[s] + 1
                    queue.append(t)
        raise MapError("goal unreachable")


def _reward_for(config: GridWorldConfig, cell_type: int) -> float:
    if cell_type == CELL_GOAL:
        return config.goal_reward
    if cell_type == CELL_WATER:
        return config.water_reward
    return 0.0


def reset(config: GridWorldConfig) -> GridState:
    return GridState(position=config.grid.cells("S")[0])


def env_step(config: GridWorldConfig, state: GridState, action, rng: np.random.Generator,
             index: Optional[GridIndex] = None):
    """Advance one step; returns ``(new_state, reward)``.

    Consumes exactly two uniforms from ``rng`` per call (wind trigger, then
    wind direction), matching the compiled training kernels.
    """
    if state.terminated:
        raise RuntimeError("cannot step a terminated episode")
    index = index or GridIndex(config.grid)
    u_wind, u_dir = rng.random(2)
    s = index.index[state.position]
    s = int(index.move[s, int(action)])
    if u_wind < config.wind_prob:
        s = int(index.move[s, min(int(u_dir * 4), 3)])
    kind = int(index.cell_type[s])
    steps = state.steps_elapsed + 1
    done = kind == CELL_GOAL or steps >= config.step_limit
    new = GridState(position=index.cells[s], steps_elapsed=steps, terminated=done,
                    violation_count=state.violation_count + (kind == CELL_WATER))
    return new, _reward_for(config, kind)


class WindyGridWorld:
    """Stateful wrapper around :func:`env_step` with its own seeded RNG."""

    def __init__(self, config: GridWorldConfig):
        self.config = config
        self.index = GridIndex(config.grid)
        self.rng = np.random.default_rng(config.seed)
        self.state = reset(config)

    def reset(self) -> GridState:
        self.state = reset(self.config)
        return self.state

    def step(self, action):
        self.state, reward = env_step(self.config, self.state, action, self.rng, self.index)
        return self.state, reward


@dataclass
class GridMDP:
    """Explicit tabular model: ``P[s, a, s']``, reward for landing in ``s'``."""

    index: GridIndex
    P: np.ndarray
    landing_reward: np.ndarray
    terminal: np.ndarray
    gamma: float = 0.95

    def induced_chain(self, policy, gamma: Optional[float] = None) -> FiniteMarkovChain:
        """Markov chain of a stationary policy.

        ``policy`` is an action per state (shape n) or action probabilities
        per state (shape n x 4).
        """
        policy = np.asarray(policy)
        n = self.index.n_states
        if policy.shape == (n,):
            probs = np.zeros((n, 4))
            probs[np.arange(n), policy.astype(int)] = 1.0
        elif policy.shape == (n, 4):
            probs = policy.astype(float)
        else:
            raise ValueError(f"policy shape {policy.shape} does not match {n} states")
        kernel = np.einsum("sa,sat->st", probs, self.P)
        rewards = np.repeat(self.landing_reward[None, :], n, axis=0)
        rewards[self.terminal] = 0.0
        return FiniteMarkovChain(kernel, rewards, self.gamma if gamma is None else gamma, self.terminal)


def enumerate_mdp(config: GridWorldConfig, gamma: float = 0.95) -> GridMDP:
    """Exact transition tensor of the gridworld (the step limit is not modelled).

    Goal cells self-loop with zero reward.
    """
    index = GridIndex(config.grid)
    n = index.n_states
    P = np.zeros((n, 4, n))
    terminal = index.cell_type == CELL_GOAL
    landing = np.array([_reward_for(config, int(k)) for k in index.cell_type])
    for s in range(n):
        if terminal[s]:
            P[s, :, s] = 1.0
            continue
        for a in range(4):
            after = index.move[s, a]
            P[s, a, after] += 1.0 - config.wind_prob
            for d in range(4):
                P[s, a, index.move[after, d]] += config.wind_prob / 4.0
    return GridMDP(index, P, landing, terminal, gamma)
