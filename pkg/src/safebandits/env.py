"""Safe-bandit problem instances and ground-truth quantities.

An instance couples a tolerated risk level ``alpha`` with a list of arm
laws on the unit square. Arms are addressed 1-based throughout the public
API, matching the usual bandit convention. Instances are immutable and
freely shareable; all sampling happens through a caller-supplied
generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import RngStream

__all__ = [
    "ArmLaw",
    "SafeBanditInstance",
    "GroundTruth",
    "ground_truth",
    "binarize",
    "regret_increment",
]

FAMILIES = ("bernoulli-independent", "general-bounded")
ARM_KINDS = ("bernoulli", "point-mass", "uniform")


@dataclass(frozen=True)
class ArmLaw:
    """One arm's joint law on rewards and safety risks.

    ``mu`` and ``nu`` are the marginal means. ``kind`` selects the sampler
    used under the general-bounded family: ``point-mass`` always returns
    the means, ``uniform`` draws each coordinate uniformly on the widest
    interval of half-width at most ``spread`` centred on the mean that
    still fits in [0, 1]. Bernoulli-independent instances ignore ``kind``.
    """

    mu: float
    nu: float
    kind: str = "bernoulli"
    spread: float = 0.25

    def __post_init__(self) -> None:
        if not (0.0 <= self.mu <= 1.0):
            raise ValueError(f"arm mean reward must lie in [0, 1], got {self.mu}")
        if not (0.0 <= self.nu <= 1.0):
            raise ValueError(f"arm mean risk must lie in [0, 1], got {self.nu}")
        if self.kind not in ARM_KINDS:
            raise ValueError(f"unknown arm kind {self.kind!r}; expected one of {ARM_KINDS}")
        if not (0.0 <= self.spread <= 0.5):
            raise ValueError(f"spread must lie in [0, 0.5], got {self.spread}")


@dataclass(frozen=True)
class SafeBanditInstance:
    """A tolerated risk level plus an ordered list of arm laws."""

    alpha: float
    arms: tuple[ArmLaw, ...]
    family: str = "bernoulli-independent"

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if len(self.arms) < 1:
            raise ValueError("instance needs at least one arm")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "arms", tuple(self.arms))

    @classmethod
    def bernoulli(cls, mu, nu, alpha: float) -> "SafeBanditInstance":
        """Independent Bernoulli rewards and risks with the given means."""
        if len(mu) != len(nu):
            raise ValueError("mu and nu must have equal length")
        arms = tuple(ArmLaw(float(m), float(n)) for m, n in zip(mu, nu))
        return cls(alpha=float(alpha), arms=arms, family="bernoulli-independent")

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def mu(self) -> np.ndarray:
        return np.array([arm.mu for arm in self.arms])

    @property
    def nu(self) -> np.ndarray:
        return np.array([arm.nu for arm in self.arms])

    def sample(self, arm: int, rng: RngStream) -> tuple[float, float]:
        """One independent draw of (reward, risk) from arm ``arm`` (1-based)."""
        if not 1 <= arm <= self.n_arms:
            raise ValueError(f"arm index {arm} outside 1..{self.n_arms}")
        law = self.arms[arm - 1]
        if self.family == "bernoulli-independent":
            r = 1.0 if rng.random() < law.mu else 0.0
            s = 1.0 if rng.random() < law.nu else 0.0
            return r, s
        if law.kind == "bernoulli":
            r = 1.0 if rng.random() < law.mu else 0.0
            s = 1.0 if rng.random() < law.nu else 0.0
            return r, s
        if law.kind == "point-mass":
            return law.mu, law.nu
        h_r = min(law.spread, law.mu, 1.0 - law.mu)
        h_s = min(law.spread, law.nu, 1.0 - law.nu)
        r = law.mu + h_r * (2.0 * rng.random() - 1.0)
        s = law.nu + h_s * (2.0 * rng.random() - 1.0)
        return r, s


@dataclass(frozen=True)
class GroundTruth:
    """Best safe arm and the per-arm gap vectors of an instance."""

    k_star: int
    mu_star: float
    delta: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)

    @property
    def n_arms(self) -> int:
        return len(self.delta)


def ground_truth(instance: SafeBanditInstance) -> GroundTruth:
    """Identify the best safe arm and compute inefficiency and safety gaps.

    The best safe arm maximises the mean reward among arms whose mean risk
    does not exceed ``alpha``; ties break towards the lowest index. Raises
    if no arm is safe.
    """
    mu = instance.mu
    nu = instance.nu
    safe = nu <= instance.alpha
    if not safe.any():
        raise ValueError("infeasible instance: no arm has mean risk <= alpha")
    rewards = np.where(safe, mu, -np.inf)
    k_star = int(np.argmax(rewards))  # argmax takes the first maximiser
    mu_star = float(mu[k_star])
    delta = np.maximum(0.0, mu_star - mu)
    gamma = np.maximum(0.0, nu - instance.alpha)
    return GroundTruth(k_star=k_star + 1, mu_star=mu_star, delta=delta, gamma=gamma)


def binarize(reward: float, risk: float, rng: RngStream) -> tuple[int, int]:
    """Convert bounded observations to Bernoulli bits with matching means.

    Each output bit is 1 with probability equal to its input, which lets
    Bernoulli-specific agents consume observations from any law on the
    unit square without changing the mean behaviour.
    """
    if not (0.0 <= reward <= 1.0 and 0.0 <= risk <= 1.0):
        raise ValueError("binarize inputs must lie in [0, 1]")
    r_bit = 1 if rng.random() < reward else 0
    s_bit = 1 if rng.random() < risk else 0
    return r_bit, s_bit


def regret_increment(truth: GroundTruth, arm: int) -> float:
    """Per-round penalty of playing ``arm``: the larger of its two gaps."""
    if not 1 <= arm <= truth.n_arms:
        raise ValueError(f"arm index {arm} outside 1..{truth.n_arms}")
    return float(max(truth.delta[arm - 1], truth.gamma[arm - 1]))
