"""Evaluation of the theoretical regret and unsafe-play guarantees.

Only the leading terms are computed: per-arm contributions carry a
``log T`` factor with the constant evaluated here, remainder terms are
dropped. These constants are what simulated curves get compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import GroundTruth, SafeBanditInstance, ground_truth
from .numerics import bern_kl_above, bern_kl_below

__all__ = [
    "BoundReport",
    "regret_main_term",
    "unsafe_main_term",
    "gap_independent_bound",
    "lower_bound_coeff",
    "bound_report",
]


def _arm_denominator(
    mu_k: float, nu_k: float, truth: GroundTruth, alpha: float, bayes_safety: bool
) -> float:
    reward_part = bern_kl_below(mu_k, truth.mu_star)
    safety_part = bern_kl_above(nu_k, alpha)
    if bayes_safety:
        safety_part *= 2.0 / 3.0
    return max(reward_part, safety_part)


def regret_main_term(
    truth: GroundTruth, instance: SafeBanditInstance, bayes_safety: bool = False
) -> float:
    """Coefficient of ``log T`` in the gap-dependent regret guarantee.

    Sums ``(gap / divergence)`` over suboptimal arms, where the gap is the
    per-round penalty and the divergence the larger of the directed KLs
    towards the best reward and the risk level. ``bayes_safety`` applies
    the 2/3 deflation of the safety divergence that the posterior-quantile
    index analysis incurs. Arms tied with the best safe arm have zero gap
    and contribute nothing.
    """
    mu = instance.mu
    nu = instance.nu
    total = 0.0
    for k in range(truth.n_arms):
        if k == truth.k_star - 1:
            continue
        gap = max(truth.delta[k], truth.gamma[k])
        if gap == 0.0:
            continue
        total += gap / _arm_denominator(mu[k], nu[k], truth, instance.alpha, bayes_safety)
    return total


def unsafe_main_term(
    truth: GroundTruth, instance: SafeBanditInstance, bayes_safety: bool = False
) -> float:
    """Coefficient of ``log T`` in the unsafe-play guarantee (unsafe arms only)."""
    mu = instance.mu
    nu = instance.nu
    total = 0.0
    for k in range(truth.n_arms):
        if truth.gamma[k] <= 0.0:
            continue
        total += 1.0 / _arm_denominator(mu[k], nu[k], truth, instance.alpha, bayes_safety)
    return total


def gap_independent_bound(n_arms: int, horizon: int) -> float:
    """Distribution-free regret guarantee ``sqrt(28 K T log T) + 6 K loglog T + 32``.

    The double logarithm is evaluated at ``max(T, 16)`` so short horizons
    cannot push the additive term negative.
    """
    if n_arms < 2:
        raise ValueError("need at least two arms")
    if horizon < 3:
        raise ValueError("horizon must be at least 3")
    log_t = math.log(horizon)
    loglog = math.log(math.log(max(horizon, 16)))
    return math.sqrt(28.0 * n_arms * horizon * log_t) + 6.0 * n_arms * loglog + 32.0


def lower_bound_coeff(truth: GroundTruth, instance: SafeBanditInstance, arm: int) -> float:
    """Asymptotic lower bound on pulls of ``arm`` per ``log T``.

    The denominator is the *sum* of the two directed divergences, which is
    what makes the upper constants loose by at most a factor of two on
    strictly dominated arms.
    """
    if arm == truth.k_star:
        raise ValueError("lower bound is defined for suboptimal arms only")
    if not 1 <= arm <= truth.n_arms:
        raise ValueError(f"arm index {arm} outside 1..{truth.n_arms}")
    k = arm - 1
    denom = bern_kl_below(instance.mu[k], truth.mu_star) + bern_kl_above(
        instance.nu[k], instance.alpha
    )
    if denom == 0.0:
        return math.inf
    return 1.0 / denom


@dataclass(frozen=True)
class BoundReport:
    """Evaluated bound constants for one instance."""

    k_star: int
    mu_star: float
    n_arms: int
    regret_main_coeff: float
    unsafe_main_coeff: float
    lower_bound_coeffs: np.ndarray = field(repr=False)  # nan at the best arm

    def gap_independent(self, horizon: int) -> float:
        return gap_independent_bound(self.n_arms, horizon)

    def to_dict(self, horizon: int | None = None) -> dict:
        out = {
            "k_star": self.k_star,
            "mu_star": self.mu_star,
            "regret_main_coeff": self.regret_main_coeff,
            "unsafe_main_coeff": self.unsafe_main_coeff,
            "lower_bound_coeffs": {
                str(k + 1): float(c)
                for k, c in enumerate(self.lower_bound_coeffs)
                if not math.isnan(c)
            },
        }
        if horizon is not None:
            out["horizon"] = horizon
            out["gap_independent_bound"] = self.gap_independent(horizon)
            scale = math.log(horizon)
            out["regret_main_term"] = self.regret_main_coeff * scale
            out["unsafe_main_term"] = self.unsafe_main_coeff * scale
        return out


def bound_report(instance: SafeBanditInstance, bayes_safety: bool = False) -> BoundReport:
    """Evaluate every bound constant for ``instance``."""
    truth = ground_truth(instance)
    coeffs = np.full(truth.n_arms, np.nan)
    for arm in range(1, truth.n_arms + 1):
        if arm != truth.k_star:
            coeffs[arm - 1] = lower_bound_coeff(truth, instance, arm)
    return BoundReport(
        k_star=truth.k_star,
        mu_star=truth.mu_star,
        n_arms=truth.n_arms,
        regret_main_coeff=regret_main_term(truth, instance, bayes_safety),
        unsafe_main_coeff=unsafe_main_term(truth, instance, bayes_safety),
        lower_bound_coeffs=coeffs,
    )
