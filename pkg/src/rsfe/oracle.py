"""Ground-truth numerics for the free-energy learning rule.

Everything here is model-based: expected updates and free energies by adaptive
Simpson quadrature, the zero of the expected update by bisection, the
KL-regularised functional and its adversarial dual, the 2-Lipschitz scan of the
expected update, and risk-sensitive value iteration over explicit Markov chains.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .math_core import (
    GaussianSpec,
    UniformSpec,
    check_beta,
    gaussian_free_energy,
    logistic_sigmoid,
    uniform_free_energy,
)


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach its tolerance."""

    def __init__(self, message, error_estimate=float("nan")):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3g})")
        self.error_estimate = error_estimate


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class FiniteDiscrete:
    """Finitely supported density ``sum_i p_i delta(x - x_i)``."""

    points: tuple

    def __post_init__(self):
        pts = tuple((float(x), float(p)) for x, p in self.points)
        if not pts:
            raise ValueError("finite density needs at least one point")
        if any(p <= 0 or not math.isfinite(x) for x, p in pts):
            raise ValueError("finite density needs finite points with positive mass")
        total = math.fsum(p for _, p in pts)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "points", pts)

    @property
    def xs(self) -> np.ndarray:
        return np.array([x for x, _ in self.points])

    @property
    def ps(self) -> np.ndarray:
        return np.array([p for _, p in self.points])

    @property
    def mean(self) -> float:
        return float(np.dot(self.xs, self.ps))

    @property
    def variance(self) -> float:
        return float(np.dot((self.xs - self.mean) ** 2, self.ps))


Density1D = Union[GaussianSpec, UniformSpec, FiniteDiscrete]


@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = 1e-10
    half_width_sd: float = 12.0
    max_depth: int = 40
    initial_panels: int = 16

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")


DEFAULT_QUADRATURE = QuadratureSettings()


def adaptive_simpson(f: Callable, a: float, b: float, abs_tol: float = 1e-10,
                     max_depth: int = 40, initial_panels: int = 16):
    """Integrate a vectorised ``f`` over ``[a, b]`` by adaptive Simpson.

    All intervals that still need refinement are processed level by level, so
    ``f`` is called once per level on an array. Returns ``(value, error)``.
    """
    if not b > a:
        raise ValueError("need a < b")
    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    f_edges = f(edges)
    fa, fb, fm = f_edges[:-1], f_edges[1:], f(mid)
    tol = np.full(lo.shape, abs_tol / initial_panels)
    whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)

    total = error = pending = 0.0
    for _ in range(max_depth):
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        f_quarter = f(np.concatenate([lm, rm]))
        flm, frm = f_quarter[: lo.size], f_quarter[lo.size:]
        h = hi - lo
        left = h / 12.0 * (fa + 4.0 * flm + fm)
        right = h / 12.0 * (fm + 4.0 * frm + fb)
        diff = left + right - whole
        done = np.abs(diff) <= 15.0 * tol
        if not np.all(np.isfinite(diff)):
            raise QuadratureError("integrand produced non-finite values")
        total += float(np.sum((left + right + diff / 15.0)[done]))
        error += float(np.sum(np.abs(diff[done]))) / 15.0
        if np.all(done):
            return total, error
        keep = ~done
        pending = float(np.sum(np.abs(diff[keep]))) / 15.0
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        fa, fm, fb = fa[keep], fm[keep], fb[keep]
        flm, frm, lm, rm = flm[keep], frm[keep], lm[keep], rm[keep]
        left, right, tol = left[keep], right[keep], tol[keep]
        lo, mid, hi = np.concatenate([lo, mid]), np.concatenate([lm, rm]), np.concatenate([mid, hi])
        fa, fm, fb = np.concatenate([fa, fm]), np.concatenate([flm, frm]), np.concatenate([fm, fb])
        whole = np.concatenate([left, right])
        tol = np.concatenate([tol, tol]) * 0.5
    raise QuadratureError("adaptive Simpson hit its depth limit", error + pending)


def _support(density, settings: QuadratureSettings, center: Optional[float] = None):
    if isinstance(density, GaussianSpec):
        c = density.mu if center is None else center
        w = settings.half_width_sd * density.sd
        return c - w, c + w
    if isinstance(density, UniformSpec):
        return density.lo, density.hi
    raise TypeError(f"no continuous support for {type(density).__name__}")


def log_pdf(density, x):
    x = np.asarray(x, dtype=float)
    if isinstance(density, GaussianSpec):
        return 0.5 * math.log(density.rho / (2.0 * math.pi)) - 0.5 * density.rho * (x - density.mu) ** 2
    if isinstance(density, UniformSpec):
        inside = (x >= density.lo) & (x <= density.hi)
        return np.where(inside, -math.log(density.hi - density.lo), -np.inf)
    raise TypeError(f"no density function for {type(density).__name__}")


def pdf(density, x):
    return np.exp(log_pdf(density, x))


def _integrate(density, g, settings: QuadratureSettings, center=None):
    a, b = _support(density, settings, center)
    return adaptive_simpson(lambda x: pdf(density, x) * g(x), a, b, settings.abs_tol,
                            settings.max_depth, settings.initial_panels)


def expected_update(density: Density1D, v: float, beta: float,
                    settings: QuadratureSettings = DEFAULT_QUADRATURE,
                    sigmoid: Optional[Callable] = None) -> float:
    """Mean increment ``J(v) = 2 E[sigma_beta(X - v) (X - v)]`` per unit step.

    ``sigmoid`` replaces the logistic sigmoid; it exists for fault injection.
    """
    beta = check_beta(beta)
    sig = logistic_sigmoid if sigmoid is None else sigmoid
    if isinstance(density, FiniteDiscrete):
        d = density.xs - v
        return float(2.0 * np.sum(density.ps * np.asarray(sig(d, beta)) * d))
    value, _ = _integrate(density, lambda x: 2.0 * sig(x - v, beta) * (x - v), settings)
    return value


def free_energy(density: Density1D, beta: float) -> float:
    """Closed-form free energy where one exists (Gaussian, uniform, discrete)."""
    if isinstance(density, GaussianSpec):
        return gaussian_free_energy(density, beta)
    if isinstance(density, UniformSpec):
        return uniform_free_energy(density, beta)
    return free_energy_quadrature(density, beta)


def fixed_point(density: Density1D, beta: float, settings: QuadratureSettings = DEFAULT_QUADRATURE,
                tol: float = 1e-12, max_expansions: int = 60) -> float:
    """Zero of the expected update, by bracketing and bisection.

    ``J`` is positive below the fixed point and negative above it, so doubling
    a bracket around ``mean + beta * var / 2`` always finds a sign change.
    """
    beta = check_beta(beta)
    if beta == 0.0:
        return float(density.mean)

    def J(v):
        return expected_update(density, v, beta, settings)

    guess = density.mean + 0.5 * beta * density.variance
    lo, hi, step = guess - 1.0, guess + 1.0, 1.0
    j_lo, j_hi = J(lo), J(hi)
    for _ in range(max_expansions):
        if j_lo > 0 and j_hi < 0:
            break
        step *= 2.0
        if j_lo <= 0:
            lo -= step
            j_lo = J(lo)
        if j_hi >= 0:
            hi += step
            j_hi = J(hi)
    else:
        raise BracketError(f"no sign change of J found in [{lo}, {hi}]")
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        j_mid = J(mid)
        if j_mid == 0.0:
            return mid
        if j_mid > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def free_energy_quadrature(density: Density1D, beta: float,
                           settings: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    """``(1/beta) log E[exp(beta X)]`` by log-sum-exp stabilised quadrature."""
    beta = check_beta(beta)
    if beta == 0.0:
        return float(density.mean)
    if isinstance(density, FiniteDiscrete):
        a = beta * density.xs + np.log(density.ps)
        m = float(np.max(a))
        return (m + math.log(float(np.sum(np.exp(a - m))))) / beta
    center = density.mu + beta / density.rho if isinstance(density, GaussianSpec) else None
    a, b = _support(density, settings, center)

    def log_g(x):
        return log_pdf(density, x) + beta * np.asarray(x)

    shift = float(np.max(log_g(np.linspace(a, b, 2049))))
    edge = float(np.max(log_g(np.array([a, b])))) - shift
    if isinstance(density, GaussianSpec) and math.exp(edge) * (b - a) > settings.abs_tol:
        raise QuadratureError("tail truncation error exceeds tolerance", math.exp(edge) * (b - a))
    value, _ = adaptive_simpson(lambda x: np.exp(log_g(x) - shift), a, b, settings.abs_tol,
                                settings.max_depth, settings.initial_panels)
    return (shift + math.log(value)) / beta


def lobe_ratio(spec: GaussianSpec, v: float, delta: float, beta: float) -> float:
    """``f(v + delta) / f(v - delta)`` with ``f(v + d) = N(v + d) sigma(d) d``.

    Computed from the definition; compare with :func:`lobe_ratio_closed_form`.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    beta = check_beta(beta)
    up = pdf(spec, v + delta) * logistic_sigmoid(delta, beta) * delta
    down = pdf(spec, v - delta) * logistic_sigmoid(-delta, beta) * delta
    return float(up / down)


def lobe_ratio_closed_form(spec: GaussianSpec, v: float, delta: float, beta: float) -> float:
    return math.exp(-2.0 * spec.rho * delta * (v - spec.mu) + beta * delta)


def kl_divergence(p: Density1D, reference: GaussianSpec,
                  settings: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    """``KL(p || reference)`` by quadrature over the support of ``p``."""
    if isinstance(p, FiniteDiscrete):
        raise ValueError("KL of a discrete density against a Gaussian is infinite")
    value, _ = _integrate(p, lambda x: log_pdf(p, x) - log_pdf(reference, x), settings)
    if not math.isfinite(value):
        raise ValueError("support mismatch: KL divergence is infinite")
    return value


def functional_value(p: Density1D, reference: GaussianSpec, beta: float,
                     settings: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    """KL-regularised expectation ``E_p[X] - KL(p || reference) / beta``."""
    beta = check_beta(beta)
    if beta == 0.0:
        raise ValueError("the functional needs beta != 0")
    if isinstance(p, FiniteDiscrete):
        raise ValueError("p must be absolutely continuous w.r.t. the reference")
    mean, _ = _integrate(p, lambda x: x, settings)
    return mean - kl_divergence(p, reference, settings) / beta


def extremizer(reference: GaussianSpec, beta: float) -> GaussianSpec:
    """Mean-tilted Gaussian ``N(mu + beta / rho, rho)`` extremising the functional."""
    return GaussianSpec(reference.mu + check_beta(beta) / reference.rho, reference.rho)


def adversarial_best_response(p: GaussianSpec, reference: GaussianSpec, beta: float, x) -> float:
    """Adversary's perturbation ``(1/beta) log(p(x) / N(x; mu, rho))`` for Gaussian ``p``.

    Uses the expanded Gaussian form
    ``(rho (x - mu)^2 - rho_p (x - mu_p)^2 + log(rho_p / rho)) / (2 beta)``.
    """
    beta = check_beta(beta)
    if beta == 0.0:
        raise ValueError("the best response needs beta != 0")
    x = np.asarray(x, dtype=float)
    out = (reference.rho * (x - reference.mu) ** 2 - p.rho * (x - p.mu) ** 2
           + math.log(p.rho / reference.rho)) / (2.0 * beta)
    return float(out) if out.ndim == 0 else out


@dataclass
class ScanRecord:
    point: dict
    J: Optional[float]
    F: float
    ratio: Optional[float]
    passed: Optional[bool]
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {"point": self.point, "J": self.J, "F": self.F, "ratio": self.ratio,
                "pass": self.passed, "error": self.error}


@dataclass
class ScanReport:
    records: list = field(default_factory=list)
    skipped: int = 0

    @property
    def violations(self) -> list:
        return [r for r in self.records if r.passed is False]

    @property
    def failures(self) -> list:
        return [r for r in self.records if r.error is not None]

    @property
    def max_ratio(self) -> float:
        ratios = [r.ratio for r in self.records if r.ratio is not None]
        return max(ratios) if ratios else float("nan")

    @property
    def argmax(self) -> Optional[dict]:
        scored = [r for r in self.records if r.ratio is not None]
        return max(scored, key=lambda r: r.ratio).point if scored else None

    def to_dict(self) -> dict:
        return {
            "max_ratio": self.max_ratio,
            "argmax": self.argmax,
            "n_points": len(self.records),
            "skipped": self.skipped,
            "violations": [dict(r.to_dict(), margin=r.ratio - 2.0) for r in self.violations],
            "failures": [r.to_dict() for r in self.failures],
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


DEFAULT_SCAN_GRID = {
    "mu": (-1.0, 0.0, 1.0),
    "rho": (0.5, 1.0, 2.0, 4.0),
    "beta": tuple(float(b) for b in range(-4, 5)),
    "offset": (0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0),
}


def lipschitz_scan(mus: Iterable[float] = DEFAULT_SCAN_GRID["mu"],
                   rhos: Iterable[float] = DEFAULT_SCAN_GRID["rho"],
                   betas: Iterable[float] = DEFAULT_SCAN_GRID["beta"],
                   offsets: Iterable[float] = DEFAULT_SCAN_GRID["offset"],
                   include_uniform: bool = False,
                   settings: QuadratureSettings = DEFAULT_QUADRATURE) -> ScanReport:
    """Check ``|J(v)| <= 2 |F_beta - v|`` at ``v = F_beta +/- offset``.

    Offsets below 1e-6 are skipped (the ratio is undefined there). Quadrature
    failures are recorded per point instead of aborting the scan. With
    ``include_uniform`` the scan also covers uniforms matching each Gaussian's
    mean and variance.
    """
    report = ScanReport()
    offsets = list(offsets)
    for mu in mus:
        for rho in rhos:
            densities = [GaussianSpec(mu, rho)]
            if include_uniform:
                half = math.sqrt(3.0 / rho)
                densities.append(UniformSpec(mu - half, mu + half))
            for density in densities:
                for beta in betas:
                    F = free_energy(density, beta)
                    for off in offsets:
                        if abs(off) < 1e-6:
                            report.skipped += 1
                            continue
                        for v in (F - off, F + off):
                            point = {"density": type(density).__name__, "mu": mu, "rho": rho,
                                     "beta": beta, "v": v}
                            try:
                                J = expected_update(density, v, beta, settings)
                            except QuadratureError as exc:
                                report.records.append(ScanRecord(point, None, F, None, None, str(exc)))
                                continue
                            ratio = abs(J) / abs(F - v)
                            report.records.append(ScanRecord(point, J, F, ratio, ratio <= 2.0))
    return report


# --------------------------------------------------------------------------
# Markov chains

@dataclass
class FiniteMarkovChain:
    """Markov chain with rewards ``R(s)`` (shape n) or ``R(s, s')`` (shape n x n).

    Terminal states must self-loop with zero reward.
    """

    kernel: np.ndarray
    rewards: np.ndarray
    gamma: float
    terminal: Optional[np.ndarray] = None

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=float)
        n = self.kernel.shape[0]
        if self.kernel.shape != (n, n):
            raise ValueError("kernel must be square")
        if np.any(self.kernel < 0) or np.any(np.abs(self.kernel.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("kernel rows must be probability vectors")
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.rewards.shape not in ((n,), (n, n)):
            raise ValueError("rewards must have shape (n,) or (n, n)")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        self.terminal = (np.zeros(n, dtype=bool) if self.terminal is None
                         else np.asarray(self.terminal, dtype=bool))
        R = self.reward_matrix
        for s in np.flatnonzero(self.terminal):
            if self.kernel[s, s] != 1.0 or R[s, s] != 0.0:
                raise ValueError(f"terminal state {s} must self-loop with zero reward")

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def reward_matrix(self) -> np.ndarray:
        """``R(s, s')`` with state-emitted rewards broadcast along ``s'``."""
        if self.rewards.ndim == 1:
            return np.repeat(self.rewards[:, None], self.n_states, axis=1)
        return self.rewards


def _bellman_free_energy(chain: FiniteMarkovChain, V, beta, log_kernel):
    Q = chain.reward_matrix + chain.gamma * V[None, :]
    if beta == 0.0:
        return np.sum(chain.kernel * Q, axis=1)
    a = beta * Q + log_kernel
    m = np.max(a, axis=1)
    return (m + np.log(np.sum(np.exp(a - m[:, None]), axis=1))) / beta


def risk_sensitive_value_iteration(chain: FiniteMarkovChain, beta: float, tol: float = 1e-10,
                                   max_iter: int = 10 ** 6, history: Optional[list] = None) -> np.ndarray:
    """Fixed point of ``V(s) = (1/beta) log sum_s' P(s'|s) exp(beta (R + gamma V(s')))``.

    ``beta = 0`` uses the expectation. Stops when the sup-norm change drops
    below ``tol``; sup-norm changes are appended to ``history`` if given.
    """
    beta = check_beta(beta)
    with np.errstate(divide="ignore"):
        log_kernel = np.log(chain.kernel)
    V = np.zeros(chain.n_states)
    for _ in range(max_iter):
        new = _bellman_free_energy(chain, V, beta, log_kernel)
        change = float(np.max(np.abs(new - V)))
        if history is not None:
            history.append(change)
        V = new
        if change < tol:
            return V
    raise RuntimeError(f"value iteration did not converge in {max_iter} iterations")


def extremal_value_iteration(chain: FiniteMarkovChain, mode: str, tol: float = 1e-12,
                             max_iter: int = 10 ** 6) -> np.ndarray:
    """Min- or max-Bellman fixed point over the support of each kernel row."""
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    support = chain.kernel > 0
    fill = np.inf if mode == "min" else -np.inf
    reduce = np.min if mode == "min" else np.max
    V = np.zeros(chain.n_states)
    for _ in range(max_iter):
        Q = np.where(support, chain.reward_matrix + chain.gamma * V[None, :], fill)
        new = reduce(Q, axis=1)
        if np.max(np.abs(new - V)) < tol:
            return new
        V = new
    raise RuntimeError("extremal value iteration did not converge")


def linear_solve_values(chain: FiniteMarkovChain) -> np.ndarray:
    """Risk-neutral values from ``(I - gamma P) V = E[R]``."""
    expected_reward = np.sum(chain.kernel * chain.reward_matrix, axis=1)
    return np.linalg.solve(np.eye(chain.n_states) - chain.gamma * chain.kernel, expected_reward)
