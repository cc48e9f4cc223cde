"""Online estimators of a certainty equivalent from a stream of samples.

``fe_step`` is the free-energy rule ``v += 2 alpha sigma_beta(x - v) (x - v)``;
at ``beta = 0`` it is the plain Robbins-Monro running average. ``md_step`` is
the Mihatsch-Dutter asymmetric rule, kept for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ._jit import njit
from .math_core import check_beta, check_floor, floored_sigmoid_kernel

SCHEDULE_CONSTANT = 0
SCHEDULE_POWER = 1


@dataclass(frozen=True)
class LearningRateSchedule:
    """Step sizes ``alpha_t``.

    ``constant``: ``alpha_t = a``. ``power``: ``alpha_t = a / (t + 1 + b)**p``
    with ``p`` in (0.5, 1], which satisfies the Robbins-Monro conditions.
    """

    kind: str = "constant"
    a: float = 0.1
    b: float = 0.0
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "power"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.a > 0:
            raise ValueError(f"learning rate must be positive, got {self.a!r}")
        if self.kind == "power":
            if self.b < 0:
                raise ValueError("power schedule offset b must be >= 0")
            if not 0.5 < self.p <= 1.0:
                raise ValueError("power schedule exponent must lie in (0.5, 1]")

    @classmethod
    def constant(cls, alpha: float) -> "LearningRateSchedule":
        return cls("constant", alpha)

    @classmethod
    def power(cls, a: float, b: float = 0.0, p: float = 1.0) -> "LearningRateSchedule":
        return cls("power", a, b, p)

    @property
    def code(self) -> int:
        return SCHEDULE_CONSTANT if self.kind == "constant" else SCHEDULE_POWER

    def params(self):
        """Flat ``(code, a, b, p)`` tuple for the compiled kernels."""
        return self.code, float(self.a), float(self.b), float(self.p)

    def __call__(self, t: int) -> float:
        return rate_kernel(self.code, self.a, self.b, self.p, t)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "alpha": self.a}
        return {"kind": "power", "a": self.a, "b": self.b, "p": self.p}

    @classmethod
    def from_dict(cls, d) -> "LearningRateSchedule":
        if isinstance(d, (int, float)):
            return cls.constant(float(d))
        kind = d.get("kind", "constant")
        if kind == "constant":
            return cls.constant(float(d.get("alpha", d.get("a", 0.1))))
        return cls.power(float(d["a"]), float(d.get("b", 0.0)), float(d.get("p", 1.0)))


@njit
def rate_kernel(code, a, b, p, t):
    if code == SCHEDULE_CONSTANT:
        return a
    return a / (t + 1.0 + b) ** p


@dataclass(frozen=True)
class EstimatorState:
    """State of the free-energy estimator.

    The floor ``eta`` is applied on every step when ``floor_warmup_steps`` is
    None, otherwise only while ``t < floor_warmup_steps``.
    """

    v: float
    beta: float = 0.0
    eta: float = 0.0
    schedule: LearningRateSchedule = LearningRateSchedule.constant(0.1)
    t: int = 0
    floor_warmup_steps: Optional[int] = None

    def __post_init__(self):
        check_beta(self.beta)
        check_floor(self.eta)
        if not math.isfinite(self.v):
            raise ValueError("estimate must be finite")
        if self.t < 0:
            raise ValueError("step counter must be >= 0")

    @property
    def alpha(self) -> float:
        return self.schedule(self.t)

    def _warmup(self) -> int:
        # -1 encodes "floor always on" for the kernels
        return -1 if self.floor_warmup_steps is None else int(self.floor_warmup_steps)


@dataclass(frozen=True)
class MdState:
    v: float
    kappa: float = 0.0
    schedule: LearningRateSchedule = LearningRateSchedule.constant(0.1)
    t: int = 0

    def __post_init__(self):
        if not -1.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [-1, 1], got {self.kappa!r}")


@njit
def fe_increment(v, x, beta, eta, alpha):
    delta = x - v
    return 2.0 * alpha * floored_sigmoid_kernel(delta, beta, eta) * delta


@njit
def fe_stream_kernel(v, t0, samples, beta, eta, warmup, code, a, b, p):
    n = samples.shape[0]
    out = np.empty(n)
    for i in range(n):
        t = t0 + i
        floor = eta if (warmup < 0 or t < warmup) else 0.0
        v = v + fe_increment(v, samples[i], beta, floor, rate_kernel(code, a, b, p, t))
        out[i] = v
    return out


@njit
def md_stream_kernel(v, t0, samples, kappa, code, a, b, p):
    n = samples.shape[0]
    out = np.empty(n)
    for i in range(n):
        delta = samples[i] - v
        u = (1.0 - kappa) if delta >= 0.0 else (1.0 + kappa)
        v = v + rate_kernel(code, a, b, p, t0 + i) * u * delta
        out[i] = v
    return out


def _as_samples(samples) -> np.ndarray:
    arr = np.ascontiguousarray(samples, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("samples must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    return arr


def fe_step(state: EstimatorState, x: float) -> EstimatorState:
    """One free-energy update; returns the successor state."""
    traj = run_stream(state, [x])
    return replace(state, v=float(traj[0]), t=state.t + 1)


def robbins_monro_step(v: float, x: float, alpha: float) -> float:
    return v + alpha * (x - v)


def md_step(state: MdState, x: float) -> MdState:
    """One Mihatsch-Dutter update: ``u = 1 - kappa`` if ``x >= v`` else ``1 + kappa``."""
    traj = run_md_stream(state, [x])
    return replace(state, v=float(traj[0]), t=state.t + 1)


def run_stream(initial: EstimatorState, samples: Sequence[float]) -> np.ndarray:
    """Feed ``samples`` through the free-energy rule; returns ``v`` after each step."""
    xs = _as_samples(samples)
    if xs.size == 0:
        return np.empty(0)
    return fe_stream_kernel(float(initial.v), int(initial.t), xs, float(initial.beta),
                            float(initial.eta), initial._warmup(), *initial.schedule.params())


def run_md_stream(initial: MdState, samples: Sequence[float]) -> np.ndarray:
    xs = _as_samples(samples)
    if xs.size == 0:
        return np.empty(0)
    return md_stream_kernel(float(initial.v), int(initial.t), xs, float(initial.kappa),
                            *initial.schedule.params())


def tail_mean(trajectory, tail: int) -> float:
    """Mean of the last ``tail`` entries of a trajectory."""
    trajectory = np.asarray(trajectory)
    if tail <= 0 or trajectory.size == 0:
        raise ValueError("need a non-empty trajectory and tail > 0")
    return float(trajectory[-tail:].mean())
