"""Bernoulli-KL and Beta-distribution numerics.

Everything here is built from scratch on top of ``math`` and numba so the
rest of the package never needs an external special-function library.
Conventions for the Bernoulli KL divergence d(a||b):

* ``0 * log 0 = 0``,
* ``d(a||0) = +inf`` for ``a > 0`` and ``d(a||1) = +inf`` for ``a < 1``.

The KL confidence-bound inversions solve ``d(mean||q) <= budget`` by
bisection, either to near machine precision (standalone use) or for a fixed
number of halvings (inside agents, where the round index caps the useful
precision). Beta CDF values come from the continued-fraction expansion of
the regularized incomplete beta function with the usual symmetry split,
quantiles from bracketing bisection refined with Newton steps, and samples
from a pair of rejection-sampled Gamma variates.

Everything is pure except sampling, which advances the caller's generator;
a single generator must not be shared across concurrent callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

__all__ = [
    "NumericsError",
    "BetaParams",
    "RngStream",
    "make_rng",
    "bern_kl",
    "bern_kl_below",
    "bern_kl_above",
    "kl_ucb",
    "kl_lcb",
    "beta_cdf",
    "beta_quantile",
    "beta_sample",
]

# Iteration cap for the continued fraction; hitting it signals a fault
# rather than silently spinning.
BETA_CF_MAX_ITER = 300
_CF_EPS = 1e-16
_CF_TINY = 1e-300

RngStream = np.random.Generator


class NumericsError(ArithmeticError):
    """An iterative routine failed to converge within its cap."""


def make_rng(seed: int) -> RngStream:
    """Deterministic generator; identical seed, identical draw sequence."""
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of a Beta law; both must be strictly positive."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise ValueError(f"Beta shape a must be positive and finite, got {self.a}")
        if not (self.b > 0.0 and math.isfinite(self.b)):
            raise ValueError(f"Beta shape b must be positive and finite, got {self.b}")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def std(self) -> float:
        s = self.a + self.b
        return math.sqrt(self.a * self.b / (s * s * (s + 1.0)))


# ---------------------------------------------------------------------------
# Bernoulli KL divergence and its confidence-bound inversions
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def _kl(a: float, b: float) -> float:
    if a == b:
        return 0.0
    res = 0.0
    if a > 0.0:
        if b <= 0.0:
            return np.inf
        res += a * math.log(a / b)
    if a < 1.0:
        if b >= 1.0:
            return np.inf
        res += (1.0 - a) * math.log((1.0 - a) / (1.0 - b))
    # Rounding can push near-equal arguments a hair below zero.
    return res if res > 0.0 else 0.0


@nb.njit(cache=True)
def _kl_ucb_iters(mean: float, budget: float, iters: int) -> float:
    if mean >= 1.0 or budget == np.inf:
        return 1.0
    if budget <= 0.0:
        return mean
    lo = mean
    hi = 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _kl(mean, mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


@nb.njit(cache=True)
def _kl_ucb_full(mean: float, budget: float) -> float:
    if mean >= 1.0 or budget == np.inf:
        return 1.0
    if budget <= 0.0:
        return mean
    lo = mean
    hi = 1.0
    for _ in range(80):
        if hi - lo <= 1e-15:
            break
        mid = 0.5 * (lo + hi)
        if _kl(mean, mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


@nb.njit(cache=True)
def _kl_lcb_iters(mean: float, budget: float, iters: int) -> float:
    return 1.0 - _kl_ucb_iters(1.0 - mean, budget, iters)


@nb.njit(cache=True)
def _kl_lcb_full(mean: float, budget: float) -> float:
    return 1.0 - _kl_ucb_full(1.0 - mean, budget)


def _check_prob(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def _check_budget(budget: float) -> float:
    budget = float(budget)
    if math.isnan(budget) or budget < 0.0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    return budget


def bern_kl(a: float, b: float) -> float:
    """KL divergence between Bernoulli laws with means ``a`` and ``b``."""
    return _kl(_check_prob(a, "a"), _check_prob(b, "b"))


def bern_kl_below(a: float, b: float) -> float:
    """``d(a||b)`` if ``a < b`` else 0."""
    a = _check_prob(a, "a")
    b = _check_prob(b, "b")
    return _kl(a, b) if a < b else 0.0


def bern_kl_above(a: float, b: float) -> float:
    """``d(a||b)`` if ``a > b`` else 0."""
    a = _check_prob(a, "a")
    b = _check_prob(b, "b")
    return _kl(a, b) if a > b else 0.0


def kl_ucb(mean: float, budget: float, iterations: int | None = None) -> float:
    """Largest ``q`` in ``[mean, 1]`` with ``bern_kl(mean, q) <= budget``.

    With ``iterations`` set, runs exactly that many bisection halvings and
    returns the feasible endpoint; otherwise bisects to well below 1e-9
    absolute accuracy.
    """
    mean = _check_prob(mean, "mean")
    budget = _check_budget(budget)
    if iterations is None:
        return _kl_ucb_full(mean, budget)
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    return _kl_ucb_iters(mean, budget, iterations)


def kl_lcb(mean: float, budget: float, iterations: int | None = None) -> float:
    """Smallest ``q`` in ``[0, mean]`` with ``bern_kl(mean, q) <= budget``.

    Computed from :func:`kl_ucb` through the complement symmetry
    ``kl_lcb(x, c) == 1 - kl_ucb(1 - x, c)``.
    """
    mean = _check_prob(mean, "mean")
    budget = _check_budget(budget)
    if iterations is None:
        return _kl_lcb_full(mean, budget)
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    return _kl_lcb_iters(mean, budget, iterations)


# ---------------------------------------------------------------------------
# Regularized incomplete beta: CDF, quantile, sampling
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def _beta_cf(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the continued fraction for I_x(a, b).
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, BETA_CF_MAX_ITER + 1):
        m2 = 2 * m
        coef = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + coef * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + coef / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        coef = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + coef * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + coef / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise NumericsError("incomplete beta continued fraction did not converge")


@nb.njit(cache=True)
def _beta_cdf(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


@nb.njit(cache=True)
def _beta_quantile(a: float, b: float, p: float) -> float:
    lo = 0.0
    hi = 1.0
    x = a / (a + b)
    ln_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    # Cap covers bisection all the way into the subnormal range (~1075
    # halvings) for far-tail quantiles of small shapes.
    for _ in range(1200):
        f = _beta_cdf(a, b, x) - p
        if abs(f) <= 5e-13:
            return x
        if f > 0.0:
            hi = x
        else:
            lo = x
        step_to = x
        if 0.0 < x < 1.0:
            pdf = math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log(1.0 - x) - ln_beta)
            if pdf > 0.0 and math.isfinite(pdf):
                step_to = x - f / pdf
        if not (lo < step_to < hi):
            step_to = 0.5 * (lo + hi)
        if step_to == x or step_to == lo or step_to == hi:
            # The bracket has collapsed to adjacent floats; no further
            # progress is representable.
            return x
        x = step_to
    raise NumericsError("beta quantile iteration did not converge")


@nb.njit(cache=True)
def _gamma_draw(shape: float, rng) -> float:
    boost = 1.0
    if shape < 1.0:
        u = rng.random()
        while u <= 0.0:
            u = rng.random()
        boost = u ** (1.0 / shape)
        shape += 1.0
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.standard_normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.random()
        if u < 1.0 - 0.0331 * x * x * x * x:
            return boost * d * v
        if u > 0.0 and math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return boost * d * v


@nb.njit(cache=True)
def _beta_draw(a: float, b: float, rng) -> float:
    ga = _gamma_draw(a, rng)
    gb = _gamma_draw(b, rng)
    total = ga + gb
    if total <= 0.0:
        return 0.5
    return ga / total


def beta_cdf(params: BetaParams, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)``."""
    return _beta_cdf(params.a, params.b, _check_prob(x, "x"))


def beta_quantile(params: BetaParams, delta: float) -> float:
    """``q`` with ``beta_cdf(params, q) == delta``, monotone in ``delta``."""
    delta = float(delta)
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return _beta_quantile(params.a, params.b, delta)


def beta_sample(params: BetaParams, rng: RngStream, size: int | None = None):
    """Draw from ``Beta(a, b)``; a scalar, or an array when ``size`` is set."""
    if size is None:
        return _beta_draw(params.a, params.b, rng)
    return _beta_draw_many(params.a, params.b, int(size), rng)


@nb.njit(cache=True)
def _beta_draw_many(a: float, b: float, size: int, rng) -> np.ndarray:
    out = np.empty(size, dtype=np.float64)
    for i in range(size):
        out[i] = _beta_draw(a, b, rng)
    return out
