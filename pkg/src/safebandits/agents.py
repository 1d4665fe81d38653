"""Decision policies for the safe bandit problem.

Three doubly optimistic schemes form the core:

* ``docb``   - KL-based upper indices on rewards, KL-based lower indices on
  safety risk; plays the best permissible reward index.
* ``topsi``  - same permissible set, Thompson sampling on rewards.
* ``tsbu``   - Beta-posterior quantiles as the safety index, Thompson
  sampling on rewards.

Alongside them sit the naive Thompson safety-index variants (``naive-ts``
and ``naive-ts-slack``), retained because their failure mode near the risk
boundary is instructive, and two policy-level baselines (``bwcr`` and
``pess``) that optimise over pairwise-supported distributions instead of
single arms.

Agents address arms 1-based. Each agent is a single-owner state machine:
``act`` and ``observe`` must alternate strictly, and the agent owns its
random generator. Per-round index computations are jitted and operate on
the agent's count/sum arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .numerics import RngStream, _beta_cdf, _beta_draw, _beta_quantile, _kl_lcb_iters, _kl_ucb_iters

__all__ = [
    "ALGORITHMS",
    "SCHEDULES",
    "AgentSpec",
    "ArmStatistics",
    "Agent",
    "make_agent",
    "pairwise_policy_value",
    "masked_argmax",
]

ALGORITHMS = ("docb", "topsi", "tsbu", "naive-ts", "naive-ts-slack", "bwcr", "pess")
SCHEDULES = ("practical", "theoretical")

# Algorithms whose indices expect Bernoulli observations; the harness
# binarizes general bounded feedback for these.
BAYESIAN_ALGORITHMS = frozenset({"topsi", "tsbu", "naive-ts", "naive-ts-slack"})
_KL_INDEX_ALGORITHMS = frozenset({"docb", "topsi", "bwcr", "pess"})


@dataclass(frozen=True)
class ArmStatistics:
    """Pull count and cumulative reward/risk for one arm."""

    n: int
    sum_r: float
    sum_s: float

    @property
    def mu_hat(self) -> float:
        if self.n == 0:
            raise ValueError("empirical mean undefined before the first pull")
        return self.sum_r / self.n

    @property
    def nu_hat(self) -> float:
        if self.n == 0:
            raise ValueError("empirical mean undefined before the first pull")
        return self.sum_s / self.n


@dataclass(frozen=True)
class AgentSpec:
    """Algorithm identifier plus hyper-parameters.

    ``gamma_schedule`` picks the KL index budget: ``practical`` uses
    ``log t`` (confidence level 1/t), ``theoretical`` the analysed
    ``log(t log^3 t)``. ``delta_schedule`` picks the posterior-quantile
    schedule for ``tsbu``: ``practical`` is ``min(alpha/2, 1/(t+1))``,
    ``theoretical`` is ``min(alpha/2, 1/(sqrt(8 N) t))``.
    """

    algorithm: str
    gamma_schedule: str = "practical"
    delta_schedule: str = "practical"
    slack_constant: float | None = None
    known_safe_arm: int | None = None
    name: str | None = None

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        if self.gamma_schedule not in SCHEDULES:
            raise ValueError(f"unknown gamma_schedule {self.gamma_schedule!r}")
        if self.delta_schedule not in SCHEDULES:
            raise ValueError(f"unknown delta_schedule {self.delta_schedule!r}")
        if self.algorithm == "naive-ts-slack":
            if self.slack_constant is None:
                raise ValueError("naive-ts-slack requires slack_constant")
            if not (self.slack_constant >= 0.0 and math.isfinite(self.slack_constant)):
                raise ValueError("slack_constant must be a finite nonnegative real")
        elif self.slack_constant is not None:
            raise ValueError(f"slack_constant is not a parameter of {self.algorithm}")
        if self.algorithm == "pess":
            if self.known_safe_arm is None:
                raise ValueError("pess requires known_safe_arm")
            if self.known_safe_arm < 1:
                raise ValueError("known_safe_arm is a 1-based arm index")
        elif self.known_safe_arm is not None:
            raise ValueError(f"known_safe_arm is not a parameter of {self.algorithm}")

    @classmethod
    def from_dict(cls, data: dict) -> "AgentSpec":
        allowed = {
            "algorithm",
            "gamma_schedule",
            "delta_schedule",
            "slack_constant",
            "known_safe_arm",
            "name",
        }
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown agent fields: {sorted(unknown)}")
        if "algorithm" not in data:
            raise ValueError("agent entry is missing 'algorithm'")
        return cls(**data)

    def label(self) -> str:
        """Stable identifier used for output files and seed derivation."""
        if self.name:
            return self.name
        parts = [self.algorithm]
        if self.algorithm in _KL_INDEX_ALGORITHMS and self.gamma_schedule != "practical":
            parts.append(self.gamma_schedule)
        if self.algorithm == "tsbu" and self.delta_schedule != "practical":
            parts.append(self.delta_schedule)
        if self.slack_constant is not None:
            parts.append(f"C{self.slack_constant:g}")
        if self.known_safe_arm is not None:
            parts.append(f"safe{self.known_safe_arm}")
        return "-".join(parts)


# ---------------------------------------------------------------------------
# Jitted per-round kernels
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def _bisect_iters(t: int) -> int:
    # max(4, ceil(log2 t)) halvings: index error of order 1/t
    k = 0
    v = 1
    while v < t:
        v *= 2
        k += 1
    return k if k > 4 else 4


@nb.njit(cache=True)
def _gamma_budget(t: int, theoretical: bool) -> float:
    if theoretical:
        tc = t if t >= 3 else 3
        lt = math.log(tc)
        return math.log(tc * lt * lt * lt)
    if t <= 1:
        return 0.0
    return math.log(t)


@nb.njit(cache=True)
def _tsbu_delta(t: int, n_k: float, alpha: float, theoretical: bool) -> float:
    if theoretical:
        val = 1.0 / (math.sqrt(8.0 * n_k) * t)
    else:
        val = 1.0 / (t + 1.0)
    half = 0.5 * alpha
    return val if val < half else half


@nb.njit(cache=True)
def _kl_lower_all(n, sum_s, budget: float, iters: int) -> np.ndarray:
    out = np.empty(n.shape[0])
    for k in range(n.shape[0]):
        if n[k] == 0:
            out[k] = 0.0
        else:
            out[k] = _kl_lcb_iters(sum_s[k] / n[k], budget / n[k], iters)
    return out


@nb.njit(cache=True)
def _kl_upper_all(n, sum_x, budget: float, iters: int) -> np.ndarray:
    out = np.empty(n.shape[0])
    for k in range(n.shape[0]):
        if n[k] == 0:
            out[k] = 1.0
        else:
            out[k] = _kl_ucb_iters(sum_x[k] / n[k], budget / n[k], iters)
    return out


@nb.njit(cache=True)
def _thompson_pick(n, sum_r, mask, rng) -> int:
    best = -1
    best_rho = -1.0
    for k in range(n.shape[0]):
        if mask[k]:
            rho = _beta_draw(sum_r[k] + 1.0, n[k] - sum_r[k] + 1.0, rng)
            if rho > best_rho:
                best = k
                best_rho = rho
    return best


@nb.njit(cache=True)
def _choose_docb(t, n, sum_r, sum_s, alpha, theoretical):
    budget = _gamma_budget(t, theoretical)
    iters = _bisect_iters(t)
    lower = _kl_lower_all(n, sum_s, budget, iters)
    mask = lower <= alpha
    if not mask.any():
        return int(np.argmin(lower)), mask
    best = -1
    best_u = -1.0
    for k in range(n.shape[0]):
        if mask[k]:
            if n[k] == 0:
                u = 1.0
            else:
                u = _kl_ucb_iters(sum_r[k] / n[k], budget / n[k], iters)
            if u > best_u:
                best = k
                best_u = u
    return best, mask


@nb.njit(cache=True)
def _choose_topsi(t, n, sum_r, sum_s, alpha, theoretical, rng):
    budget = _gamma_budget(t, theoretical)
    iters = _bisect_iters(t)
    lower = _kl_lower_all(n, sum_s, budget, iters)
    mask = lower <= alpha
    if not mask.any():
        return int(np.argmin(lower)), mask
    return _thompson_pick(n, sum_r, mask, rng), mask


@nb.njit(cache=True)
def _tsbu_mask(t, n, sum_s, alpha, theoretical):
    # Quantile comparison without the quantile: Q(P, delta) <= alpha holds
    # exactly when the CDF at alpha is at least delta.
    mask = np.empty(n.shape[0], dtype=np.bool_)
    for k in range(n.shape[0]):
        if sum_s[k] <= 0.0:
            mask[k] = True
        else:
            delta = _tsbu_delta(t, float(n[k]), alpha, theoretical)
            mask[k] = _beta_cdf(sum_s[k], n[k] - sum_s[k] + 1.0, alpha) >= delta
    return mask


@nb.njit(cache=True)
def _tsbu_lower_all(t, n, sum_s, alpha, theoretical):
    out = np.zeros(n.shape[0])
    for k in range(n.shape[0]):
        if sum_s[k] > 0.0:
            delta = _tsbu_delta(t, float(n[k]), alpha, theoretical)
            if delta > 0.0:
                out[k] = _beta_quantile(sum_s[k], n[k] - sum_s[k] + 1.0, delta)
    return out


@nb.njit(cache=True)
def _choose_tsbu(t, n, sum_r, sum_s, alpha, theoretical, rng):
    mask = _tsbu_mask(t, n, sum_s, alpha, theoretical)
    if not mask.any():
        lower = _tsbu_lower_all(t, n, sum_s, alpha, theoretical)
        return int(np.argmin(lower)), mask
    return _thompson_pick(n, sum_r, mask, rng), mask


@nb.njit(cache=True)
def _choose_naive(t, n, sum_r, sum_s, alpha, slack_c, rng):
    # slack_c < 0 selects the plain sampled safety index
    K = n.shape[0]
    theta = np.empty(K)
    mask = np.empty(K, dtype=np.bool_)
    for k in range(K):
        a = sum_s[k] + 1.0
        b = n[k] - sum_s[k] + 1.0
        theta[k] = _beta_draw(a, b, rng)
        threshold = alpha
        if slack_c >= 0.0:
            s = a + b
            dev = math.sqrt(a * b / (s * s * (s + 1.0)))
            threshold = alpha + slack_c * dev * math.sqrt(math.log(t))
        mask[k] = theta[k] <= threshold
    if not mask.any():
        return int(np.argmin(theta)), mask
    return _thompson_pick(n, sum_r, mask, rng), mask


@nb.njit(cache=True)
def _pair_value(reward_idx, risk_idx, alpha, i, j):
    """Optimal two-point policy on arms (i, j): (admissible, value, w_i)."""
    ri = risk_idx[i]
    rj = risk_idx[j]
    ui = reward_idx[i]
    uj = reward_idx[j]
    i_safe = ri <= alpha
    j_safe = rj <= alpha
    if i_safe and j_safe:
        if ui >= uj:
            return True, ui, 1.0
        return True, uj, 0.0
    if not (i_safe or j_safe):
        return False, 0.0, 0.0
    swapped = not i_safe
    if swapped:
        ri, rj = rj, ri
        ui, uj = uj, ui
    if ui >= uj:
        w_i = 1.0
        value = ui
    else:
        # spend the whole risk slack on the unsafe coordinate
        w_j = (alpha - ri) / (rj - ri)
        w_i = 1.0 - w_j
        value = w_i * ui + w_j * uj
    if swapped:
        w_i = 1.0 - w_i
    return True, value, w_i


@nb.njit(cache=True)
def _choose_policy(t, n, sum_r, sum_s, alpha, theoretical, pessimistic_risk, safe_arm, rng):
    K = n.shape[0]
    budget = _gamma_budget(t, theoretical)
    iters = _bisect_iters(t)
    reward_idx = _kl_upper_all(n, sum_r, budget, iters)
    if pessimistic_risk:
        risk_idx = _kl_upper_all(n, sum_s, budget, iters)
        if safe_arm >= 0 and risk_idx[safe_arm] > alpha:
            risk_idx[safe_arm] = alpha
    else:
        risk_idx = _kl_lower_all(n, sum_s, budget, iters)
    mask = risk_idx <= alpha
    best_val = -1.0
    best_i = -1
    best_j = -1
    best_w = 1.0
    for i in range(K):
        for j in range(i, K):
            ok, value, w_i = _pair_value(reward_idx, risk_idx, alpha, i, j)
            if ok and value > best_val:
                best_val = value
                best_i = i
                best_j = j
                best_w = w_i
    if best_i < 0:
        return int(np.argmin(risk_idx)), mask
    if rng.random() < best_w:
        return best_i, mask
    return best_j, mask


# ---------------------------------------------------------------------------
# Agent state machines
# ---------------------------------------------------------------------------


class Agent:
    """Mutable per-trial decision state; not shareable across threads."""

    def __init__(self, spec: AgentSpec, n_arms: int, alpha: float, rng: RngStream):
        if n_arms < 2:
            raise ValueError("need at least two arms")
        if not (0.0 <= alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        self.spec = spec
        self.n_arms = n_arms
        self.alpha = float(alpha)
        self.rng = rng
        self.n = np.zeros(n_arms, dtype=np.int64)
        self.sum_r = np.zeros(n_arms, dtype=np.float64)
        self.sum_s = np.zeros(n_arms, dtype=np.float64)
        self._rounds_done = 0
        self._pending: int | None = None
        #: permissible-arm mask from the latest index-based decision,
        #: None during forced round-robin rounds
        self.last_permissible: np.ndarray | None = None

    def act(self, t: int) -> int:
        """Choose the arm for round ``t`` (1-based arm index)."""
        if self._pending is not None:
            raise RuntimeError("act called before observing the previous pull")
        if t != self._rounds_done + 1:
            raise ValueError(
                f"round index {t} out of order; expected {self._rounds_done + 1}"
            )
        arm0 = self._choose(t)
        self._pending = arm0 + 1
        return self._pending

    def observe(self, arm: int, reward: float, risk: float) -> None:
        """Record the (reward, risk) feedback for the arm just played."""
        if self._pending is None:
            raise RuntimeError("observe called before act")
        if arm != self._pending:
            raise ValueError(f"observed arm {arm} does not match played arm {self._pending}")
        if not (0.0 <= reward <= 1.0 and 0.0 <= risk <= 1.0):
            raise ValueError("feedback must lie in [0, 1]")
        k = arm - 1
        self.n[k] += 1
        self.sum_r[k] += reward
        self.sum_s[k] += risk
        self._rounds_done += 1
        self._pending = None

    def statistics(self, arm: int) -> ArmStatistics:
        k = arm - 1
        return ArmStatistics(int(self.n[k]), float(self.sum_r[k]), float(self.sum_s[k]))

    def _choose(self, t: int) -> int:
        raise NotImplementedError


class _KlSafetyAgent(Agent):
    """Shared machinery for the KL safety index plus forced round-robin."""

    def __init__(self, spec, n_arms, alpha, rng):
        super().__init__(spec, n_arms, alpha, rng)
        self._theoretical = spec.gamma_schedule == "theoretical"

    def safety_indices(self, t: int) -> np.ndarray:
        budget = _gamma_budget(t, self._theoretical)
        return _kl_lower_all(self.n, self.sum_s, budget, _bisect_iters(t))

    def permissible_mask(self, t: int) -> np.ndarray:
        return self.safety_indices(t) <= self.alpha


class DocbAgent(_KlSafetyAgent):
    def reward_indices(self, t: int) -> np.ndarray:
        budget = _gamma_budget(t, self._theoretical)
        return _kl_upper_all(self.n, self.sum_r, budget, _bisect_iters(t))

    def _choose(self, t: int) -> int:
        if t <= self.n_arms:
            self.last_permissible = None
            return t - 1
        arm0, mask = _choose_docb(
            t, self.n, self.sum_r, self.sum_s, self.alpha, self._theoretical
        )
        self.last_permissible = mask
        return arm0


class TopsiAgent(_KlSafetyAgent):
    def _choose(self, t: int) -> int:
        if t <= self.n_arms:
            self.last_permissible = None
            return t - 1
        arm0, mask = _choose_topsi(
            t, self.n, self.sum_r, self.sum_s, self.alpha, self._theoretical, self.rng
        )
        self.last_permissible = mask
        return arm0


class TsbuAgent(Agent):
    def __init__(self, spec, n_arms, alpha, rng):
        super().__init__(spec, n_arms, alpha, rng)
        self._theoretical = spec.delta_schedule == "theoretical"

    def safety_indices(self, t: int) -> np.ndarray:
        return _tsbu_lower_all(t, self.n, self.sum_s, self.alpha, self._theoretical)

    def permissible_mask(self, t: int) -> np.ndarray:
        return _tsbu_mask(t, self.n, self.sum_s, self.alpha, self._theoretical)

    def _choose(self, t: int) -> int:
        arm0, mask = _choose_tsbu(
            t, self.n, self.sum_r, self.sum_s, self.alpha, self._theoretical, self.rng
        )
        self.last_permissible = mask
        return arm0


class NaiveTsAgent(Agent):
    def __init__(self, spec, n_arms, alpha, rng):
        super().__init__(spec, n_arms, alpha, rng)
        self._slack = -1.0 if spec.slack_constant is None else float(spec.slack_constant)

    def _choose(self, t: int) -> int:
        arm0, mask = _choose_naive(
            t, self.n, self.sum_r, self.sum_s, self.alpha, self._slack, self.rng
        )
        self.last_permissible = mask
        return arm0


class PolicyBaselineAgent(Agent):
    """Pairwise-supported policy baselines over confidence-bound indices."""

    def __init__(self, spec, n_arms, alpha, rng):
        super().__init__(spec, n_arms, alpha, rng)
        self._theoretical = spec.gamma_schedule == "theoretical"
        self._pessimistic = spec.algorithm == "pess"
        if self._pessimistic:
            if spec.known_safe_arm > n_arms:
                raise ValueError(
                    f"known_safe_arm {spec.known_safe_arm} outside 1..{n_arms}"
                )
            self._safe_arm0 = spec.known_safe_arm - 1
        else:
            self._safe_arm0 = -1

    def _choose(self, t: int) -> int:
        arm0, mask = _choose_policy(
            t,
            self.n,
            self.sum_r,
            self.sum_s,
            self.alpha,
            self._theoretical,
            self._pessimistic,
            self._safe_arm0,
            self.rng,
        )
        self.last_permissible = mask
        return arm0


_AGENT_CLASSES = {
    "docb": DocbAgent,
    "topsi": TopsiAgent,
    "tsbu": TsbuAgent,
    "naive-ts": NaiveTsAgent,
    "naive-ts-slack": NaiveTsAgent,
    "bwcr": PolicyBaselineAgent,
    "pess": PolicyBaselineAgent,
}


def make_agent(spec: AgentSpec, n_arms: int, alpha: float, rng: RngStream) -> Agent:
    """Instantiate the agent for ``spec`` with zeroed statistics."""
    return _AGENT_CLASSES[spec.algorithm](spec, n_arms, alpha, rng)


def masked_argmax(values: np.ndarray, mask: np.ndarray) -> int:
    """Index of the largest value among masked-in entries, lowest index wins."""
    if not mask.any():
        raise ValueError("mask selects no entries")
    best = -1
    best_val = -math.inf
    for k in range(len(values)):
        if mask[k] and values[k] > best_val:
            best = k
            best_val = values[k]
    return best


def pairwise_policy_value(
    idx_reward, idx_risk, alpha: float, i: int, j: int
) -> tuple[float, tuple[float, float]]:
    """Best value of a distribution on arms ``i, j`` (1-based) whose mixed
    risk index stays at or below ``alpha``; raises if neither arm's risk
    index is at most ``alpha``."""
    idx_reward = np.asarray(idx_reward, dtype=np.float64)
    idx_risk = np.asarray(idx_risk, dtype=np.float64)
    if idx_reward.shape != idx_risk.shape:
        raise ValueError("reward and risk index vectors must have equal length")
    for arm in (i, j):
        if not 1 <= arm <= len(idx_reward):
            raise ValueError(f"arm index {arm} outside 1..{len(idx_reward)}")
    ok, value, w_i = _pair_value(idx_reward, idx_risk, float(alpha), i - 1, j - 1)
    if not ok:
        raise ValueError(f"inadmissible pair ({i}, {j}): both risk indices exceed alpha")
    return float(value), (float(w_i), float(1.0 - w_i))
