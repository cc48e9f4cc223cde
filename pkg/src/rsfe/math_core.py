"""Scalar kernels: sigmoids, closed-form free energies, the dilogarithm and the
error function implied by the free-energy learning rule.

Conventions: ``beta`` is the inverse temperature (negative is risk-averse,
positive is risk-seeking) and Gaussians are parametrised by mean ``mu`` and
precision ``rho`` (inverse variance).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit

PI2_6 = math.pi ** 2 / 6.0

# |beta * delta| below which the error function uses its tanh power series
_ERROR_SERIES_CUTOFF = 0.25
# tanh(x) = sum_k TANH_COEFFS[k] * x**(2k+1)
_TANH_COEFFS = np.array([
    1.0,
    -1.0 / 3.0,
    2.0 / 15.0,
    -17.0 / 315.0,
    62.0 / 2835.0,
    -1382.0 / 155925.0,
    21844.0 / 6081075.0,
    -929569.0 / 638512875.0,
])


def check_beta(beta) -> float:
    """Validate an inverse temperature and return it as a float."""
    beta = float(beta)
    if not math.isfinite(beta):
        raise ValueError(f"inverse temperature must be finite, got {beta!r}")
    return beta


def check_floor(eta) -> float:
    """Validate a sigmoid floor ``eta`` in [0, 0.5)."""
    eta = float(eta)
    if not 0.0 <= eta < 0.5:
        raise ValueError(f"sigmoid floor must lie in [0, 0.5), got {eta!r}")
    return eta


@dataclass(frozen=True)
class GaussianSpec:
    mu: float
    rho: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.rho)):
            raise ValueError("Gaussian parameters must be finite")
        if self.rho <= 0:
            raise ValueError(f"precision must be positive, got {self.rho!r}")

    @property
    def sd(self) -> float:
        return 1.0 / math.sqrt(self.rho)

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        return 1.0 / self.rho


@dataclass(frozen=True)
class UniformSpec:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("uniform bounds must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def variance(self) -> float:
        return (self.hi - self.lo) ** 2 / 12.0


# --------------------------------------------------------------------------
# kernels (numba-compiled unless RSFE_DISABLE_NUMBA is set)

@njit
def sigmoid_kernel(z, beta):
    t = beta * z
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@njit
def floored_sigmoid_kernel(z, beta, eta):
    return eta + (1.0 - 2.0 * eta) * sigmoid_kernel(z, beta)


@njit
def softplus_kernel(t):
    if t > 0.0:
        return t + math.log1p(math.exp(-t))
    return math.log1p(math.exp(t))


@njit
def _dilog_series(z):
    # sum z^k / k^2, used for |z| <= 0.5
    total = 0.0
    power = z
    k = 1
    while k < 200:
        term = power / (k * k)
        total += term
        if abs(term) < 1e-18:
            break
        power *= z
        k += 1
    return total


@njit
def dilog_kernel(z):
    if z > 1.0 or z != z:
        raise ValueError("dilog is only defined here for real z <= 1")
    if z == 1.0:
        return PI2_6
    offset = 0.0
    sign = 1.0
    if z < -1.0:
        # inversion: li2(z) = -pi^2/6 - log(-z)^2 / 2 - li2(1/z)
        lz = math.log(-z)
        offset = -PI2_6 - 0.5 * lz * lz
        sign = -1.0
        z = 1.0 / z
    if z < -0.5:
        # Landen: li2(z) = -li2(z/(z-1)) - log(1-z)^2 / 2
        l1 = math.log1p(-z)
        value = -_dilog_series(z / (z - 1.0)) - 0.5 * l1 * l1
    elif z <= 0.5:
        value = _dilog_series(z)
    else:
        # reflection: li2(z) + li2(1-z) = pi^2/6 - log(z) log(1-z)
        value = PI2_6 - math.log(z) * math.log1p(-z) - _dilog_series(1.0 - z)
    return offset + sign * value


@njit
def error_function_kernel(delta, beta):
    if delta == 0.0:
        return 0.0
    u = beta * delta
    d2 = delta * delta
    if abs(u) < _ERROR_SERIES_CUTOFF:
        # e = d^2 (1/2 + int_0^1 tanh(u s / 2) s ds)
        x = 0.5 * u
        x2 = x * x
        acc = 0.0
        p = x
        for k in range(_TANH_COEFFS.shape[0]):
            acc += _TANH_COEFFS[k] * p / (2 * k + 3)
            p *= x2
        return d2 * (0.5 + acc)
    if u > 0.0:
        # inversion of li2(-e^u) keeps every exponential non-positive
        g = (1.0 + 2.0 * softplus_kernel(-u) / u
             - 2.0 * (PI2_6 / 2.0 + dilog_kernel(-math.exp(-u))) / (u * u))
    else:
        g = 2.0 * softplus_kernel(u) / u + 2.0 * (dilog_kernel(-math.exp(u)) + PI2_6 / 2.0) / (u * u)
    return d2 * g


# --------------------------------------------------------------------------
# public API

def logistic_sigmoid(z, beta):
    """Scaled logistic sigmoid ``1 / (1 + exp(-beta * z))``.

    Accepts a scalar or an array for ``z``. Only non-positive arguments are
    exponentiated, so the result saturates to exactly 0.0 or 1.0 instead of
    overflowing.
    """
    beta = check_beta(beta)
    if np.ndim(z) == 0:
        return sigmoid_kernel(float(z), beta)
    t = beta * np.asarray(z, dtype=float)
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def floored_sigmoid(z, beta, eta):
    """Sigmoid squeezed into ``[eta, 1 - eta]``."""
    eta = check_floor(eta)
    return eta + (1.0 - 2.0 * eta) * logistic_sigmoid(z, beta)


def softplus(t):
    """Overflow-safe ``log(1 + exp(t))``."""
    return np.logaddexp(0.0, t) if np.ndim(t) else softplus_kernel(float(t))


def gaussian_free_energy(spec: GaussianSpec, beta) -> float:
    """Free energy of N(mu, 1/rho): ``mu + beta / (2 rho)``."""
    return spec.mu + check_beta(beta) / (2.0 * spec.rho)


def uniform_free_energy(spec: UniformSpec, beta) -> float:
    """Free energy ``(1/beta) log E[exp(beta X)]`` of a uniform variable.

    Evaluated in log space; falls back to the mean for ``|beta| < 1e-8``
    where the closed form has a removable singularity.
    """
    beta = check_beta(beta)
    if abs(beta) < 1e-8:
        return spec.mean
    a, b = beta * spec.lo, beta * spec.hi
    top, bottom = max(a, b), min(a, b)
    # |e^b - e^a| / |beta (hi - lo)|, both signs cancel
    log_num = top + math.log(-math.expm1(bottom - top))
    return (log_num - math.log(abs(beta) * (spec.hi - spec.lo))) / beta


def dilog(z) -> float:
    """Real dilogarithm ``li2(z) = -int_0^z log(1 - t) / t dt`` for ``z <= 1``."""
    z = float(z)
    if not z <= 1.0:
        raise ValueError(f"dilog is only defined here for real z <= 1, got {z!r}")
    return dilog_kernel(z)


def error_function(delta, beta) -> float:
    """Loss whose gradient step is the free-energy update.

    ``e(delta, beta) = 2 * int_0^delta sigma_beta(t) t dt``, i.e.
    ``(2 delta / beta) softplus(beta delta) + (2 / beta^2) li2(-exp(beta delta))
    + pi^2 / (6 beta^2)``. Zero at ``delta = 0`` and ``delta**2 / 2`` at
    ``beta = 0``. Small ``|beta * delta|`` goes through the tanh series, which
    avoids the ``1 / beta**2`` cancellation and makes the beta -> 0 limit
    continuous.

    As a function of the estimate ``v`` (with ``delta = x - v``) its derivative
    is ``-2 sigma_beta(delta) delta``, so ``v - alpha * de/dv`` reproduces the
    learning rule.
    """
    delta = float(delta)
    if not math.isfinite(delta):
        raise ValueError("delta must be finite")
    return error_function_kernel(delta, check_beta(beta))


def beta_for_sigma(n, rho) -> float:
    """Inverse temperature placing the Gaussian free energy ``n`` sd from the mean."""
    rho = float(rho)
    if not rho > 0:
        raise ValueError(f"precision must be positive, got {rho!r}")
    return 2.0 * float(n) * math.sqrt(rho)
