"""Seeded multi-trial experiment execution and aggregation.

A single JSON document describes an experiment: the bandit instance, the
horizon, the trial count, the agents to run, a base seed, and the
recording stride. Each (agent, trial) pair derives its own random streams
from ``(base_seed, agent label, trial index)``, so results never depend on
execution order or on which other agents share the experiment, and trials
can run in parallel worker processes.

Per-round metrics follow the regret definition: the cumulative maximum-gap
penalty, the count of rounds playing an arm whose true risk exceeds the
tolerated level, and the cumulative magnitude of those exceedances (the
figure label "total safety violation" is ambiguous between the last two,
so both are recorded).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import BAYESIAN_ALGORITHMS, AgentSpec, make_agent
from .env import ArmLaw, SafeBanditInstance, binarize, ground_truth

__all__ = [
    "ConfigError",
    "TrialFault",
    "ExperimentConfig",
    "TrialSeries",
    "AggregateSeries",
    "AgentResult",
    "SweepResult",
    "run_trial",
    "run_experiment",
    "sweep",
    "write_results",
    "resolve_workers",
]

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "t",
    "regret_mean",
    "regret_median",
    "regret_q1",
    "regret_q3",
    "regret_min",
    "regret_max",
    "unsafe_mean",
    "unsafe_median",
    "unsafe_q1",
    "unsafe_q3",
    "violation_mean",
)

SWEEP_COLUMNS = (
    "param",
    "agent",
    "regret_mean",
    "regret_median",
    "unsafe_mean",
    "unsafe_median",
    "violation_mean",
    "invsqrt_regret_mean",
)

WORKERS_ENV_VAR = "SAFEBANDITS_WORKERS"


class ConfigError(ValueError):
    """The experiment description is malformed."""


class TrialFault(RuntimeError):
    """A trial aborted; carries the agent label and trial index."""


def _instance_from_dict(data: dict) -> SafeBanditInstance:
    if not isinstance(data, dict):
        raise ConfigError("'instance' must be an object")
    try:
        mu = data["mu"]
        nu = data["nu"]
        alpha = data["alpha"]
    except KeyError as missing:
        raise ConfigError(f"instance is missing {missing}") from None
    family = data.get("family", "bernoulli-independent")
    kinds = data.get("kinds")
    spreads = data.get("spreads")
    if len(mu) != len(nu):
        raise ConfigError("instance mu and nu must have equal length")
    try:
        if family == "bernoulli-independent":
            return SafeBanditInstance.bernoulli(mu, nu, alpha)
        arms = []
        for k in range(len(mu)):
            arms.append(
                ArmLaw(
                    mu=float(mu[k]),
                    nu=float(nu[k]),
                    kind=kinds[k] if kinds else "bernoulli",
                    spread=float(spreads[k]) if spreads else 0.25,
                )
            )
        return SafeBanditInstance(alpha=float(alpha), arms=tuple(arms), family=family)
    except ValueError as bad:
        raise ConfigError(str(bad)) from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment."""

    instance: SafeBanditInstance
    horizon: int
    trials: int
    agents: tuple[AgentSpec, ...]
    base_seed: int = 0
    record_stride: int = 50

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.record_stride < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}")
        if not self.agents:
            raise ConfigError("experiment needs at least one agent")
        labels = [spec.label() for spec in self.agents]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"agent labels must be unique, got {labels}")
        object.__setattr__(self, "agents", tuple(self.agents))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("experiment config must be a JSON object")
        known = {"instance", "horizon", "trials", "agents", "base_seed", "record_stride"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for required in ("instance", "horizon", "trials", "agents"):
            if required not in data:
                raise ConfigError(f"config is missing '{required}'")
        try:
            agents = tuple(AgentSpec.from_dict(entry) for entry in data["agents"])
        except (TypeError, ValueError) as bad:
            raise ConfigError(f"bad agent entry: {bad}") from None
        return cls(
            instance=_instance_from_dict(data["instance"]),
            horizon=int(data["horizon"]),
            trials=int(data["trials"]),
            agents=agents,
            base_seed=int(data.get("base_seed", 0)),
            record_stride=int(data.get("record_stride", 50)),
        )

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
        except OSError as bad:
            raise ConfigError(f"cannot read config {path}: {bad}") from None
        except json.JSONDecodeError as bad:
            raise ConfigError(f"config {path} is not valid JSON: {bad}") from None
        return cls.from_dict(data)

    def record_points(self) -> np.ndarray:
        points = list(range(self.record_stride, self.horizon + 1, self.record_stride))
        if not points or points[-1] != self.horizon:
            points.append(self.horizon)
        return np.asarray(points, dtype=np.int64)


@dataclass(frozen=True)
class TrialSeries:
    """Metrics of one seeded trial, sampled on the recording schedule."""

    trial_index: int
    t: np.ndarray = field(repr=False)
    regret: np.ndarray = field(repr=False)
    unsafe: np.ndarray = field(repr=False)
    violation: np.ndarray = field(repr=False)
    final_pulls: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class AggregateSeries:
    """Pointwise cross-trial statistics on the recording schedule."""

    t: np.ndarray = field(repr=False)
    regret_mean: np.ndarray = field(repr=False)
    regret_median: np.ndarray = field(repr=False)
    regret_q1: np.ndarray = field(repr=False)
    regret_q3: np.ndarray = field(repr=False)
    regret_min: np.ndarray = field(repr=False)
    regret_max: np.ndarray = field(repr=False)
    unsafe_mean: np.ndarray = field(repr=False)
    unsafe_median: np.ndarray = field(repr=False)
    unsafe_q1: np.ndarray = field(repr=False)
    unsafe_q3: np.ndarray = field(repr=False)
    violation_mean: np.ndarray = field(repr=False)

    @classmethod
    def from_trials(cls, series: list[TrialSeries]) -> "AggregateSeries":
        if not series:
            raise ValueError("cannot aggregate zero trials")
        series = sorted(series, key=lambda s: s.trial_index)
        regret = np.stack([s.regret for s in series])
        unsafe = np.stack([s.unsafe for s in series]).astype(np.float64)
        violation = np.stack([s.violation for s in series])
        q1_r, med_r, q3_r = np.percentile(regret, [25, 50, 75], axis=0)
        q1_u, med_u, q3_u = np.percentile(unsafe, [25, 50, 75], axis=0)
        return cls(
            t=series[0].t.copy(),
            regret_mean=regret.mean(axis=0),
            regret_median=med_r,
            regret_q1=q1_r,
            regret_q3=q3_r,
            regret_min=regret.min(axis=0),
            regret_max=regret.max(axis=0),
            unsafe_mean=unsafe.mean(axis=0),
            unsafe_median=med_u,
            unsafe_q1=q1_u,
            unsafe_q3=q3_u,
            violation_mean=violation.mean(axis=0),
        )

    def to_csv(self, path: str | Path) -> None:
        columns = [getattr(self, name) for name in CSV_COLUMNS]
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(",".join(CSV_COLUMNS) + "\n")
            for row in zip(*columns):
                cells = [str(int(row[0]))] + [format(v, ".10g") for v in row[1:]]
                handle.write(",".join(cells) + "\n")


@dataclass(frozen=True)
class AgentResult:
    """One agent's aggregate over an experiment, plus bookkeeping."""

    label: str
    aggregate: AggregateSeries
    trials_completed: int
    failures: int
    mean_final_pulls: np.ndarray = field(repr=False)
    final_regrets: np.ndarray = field(repr=False)
    final_unsafe: np.ndarray = field(repr=False)


def _trial_streams(base_seed: int, label: str, trial_index: int):
    # Counter-style derivation: the label hash keeps streams stable when
    # agents are added to or removed from a config.
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    agent_key = int.from_bytes(digest[:8], "little")
    root = np.random.SeedSequence([int(base_seed), agent_key, int(trial_index)])
    env_ss, agent_ss = root.spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(agent_ss)


def run_trial(config: ExperimentConfig, spec: AgentSpec, trial_index: int) -> TrialSeries:
    """Run one seeded trial of ``spec`` on the configured instance."""
    instance = config.instance
    truth = ground_truth(instance)
    env_rng, agent_rng = _trial_streams(config.base_seed, spec.label(), trial_index)
    agent = make_agent(spec, instance.n_arms, instance.alpha, agent_rng)

    penalty = np.maximum(truth.delta, truth.gamma)
    unsafe_arm = truth.gamma > 0.0
    overshoot = truth.gamma.copy()

    needs_bits = (
        instance.family == "general-bounded" and spec.algorithm in BAYESIAN_ALGORITHMS
    )
    points = config.record_points()
    regret_out = np.empty(len(points))
    unsafe_out = np.empty(len(points), dtype=np.int64)
    violation_out = np.empty(len(points))

    regret = 0.0
    unsafe = 0
    violation = 0.0
    cursor = 0
    act = agent.act
    observe = agent.observe
    sample = instance.sample
    try:
        for t in range(1, config.horizon + 1):
            arm = act(t)
            reward, risk = sample(arm, env_rng)
            if needs_bits:
                reward, risk = binarize(reward, risk, env_rng)
            observe(arm, reward, risk)
            k = arm - 1
            regret += penalty[k]
            if unsafe_arm[k]:
                unsafe += 1
                violation += overshoot[k]
            if t == points[cursor]:
                regret_out[cursor] = regret
                unsafe_out[cursor] = unsafe
                violation_out[cursor] = violation
                cursor += 1
    except Exception as exc:
        raise TrialFault(
            f"trial {trial_index} of agent {spec.label()!r} failed at round {t}: {exc}"
        ) from exc
    return TrialSeries(
        trial_index=trial_index,
        t=points,
        regret=regret_out,
        unsafe=unsafe_out,
        violation=violation_out,
        final_pulls=agent.n.copy(),
    )


def _trial_task(args):
    config, spec, trial_index = args
    try:
        return spec.label(), trial_index, run_trial(config, spec, trial_index), None
    except TrialFault as fault:
        return spec.label(), trial_index, None, str(fault)


def resolve_workers(workers: int | None = None) -> int:
    """CLI flag beats the environment variable beats serial execution."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV_VAR}={env!r} is not an integer") from None
    return 1


def run_experiment(
    config: ExperimentConfig, workers: int | None = None
) -> dict[str, AgentResult]:
    """Run every (agent, trial) pair and aggregate per agent.

    Failed trials are logged, counted, and excluded from the aggregates;
    the experiment only raises if an agent completes no trial at all.
    """
    workers = resolve_workers(workers)
    tasks = [
        (config, spec, trial)
        for spec in config.agents
        for trial in range(config.trials)
    ]
    outcomes = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_trial_task, tasks, chunksize=1))
    else:
        outcomes = [_trial_task(task) for task in tasks]

    by_label: dict[str, list[TrialSeries]] = {spec.label(): [] for spec in config.agents}
    failures: dict[str, int] = {spec.label(): 0 for spec in config.agents}
    for label, trial_index, series, error in outcomes:
        if error is None:
            by_label[label].append(series)
        else:
            failures[label] += 1
            logger.warning("%s", error)

    results: dict[str, AgentResult] = {}
    for spec in config.agents:
        label = spec.label()
        completed = by_label[label]
        if not completed:
            raise TrialFault(f"all {config.trials} trials of agent {label!r} failed")
        completed.sort(key=lambda s: s.trial_index)
        pulls = np.stack([s.final_pulls for s in completed]).mean(axis=0)
        results[label] = AgentResult(
            label=label,
            aggregate=AggregateSeries.from_trials(completed),
            trials_completed=len(completed),
            failures=failures[label],
            mean_final_pulls=pulls,
            final_regrets=np.array([s.regret[-1] for s in completed]),
            final_unsafe=np.array([s.unsafe[-1] for s in completed]),
        )
    return results


# ---------------------------------------------------------------------------
# Parameter sweeps
# ---------------------------------------------------------------------------


def _substitute(data: dict, path: str, value):
    parts = path.split(".")
    node = data
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"sweep parameter path {path!r} not found in config")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"sweep parameter path {path!r} not found in config")
    node[parts[-1]] = value


@dataclass(frozen=True)
class SweepResult:
    """Final-round metrics per (grid value, agent)."""

    param: str
    rows: tuple[dict, ...]
    failures: tuple[tuple[str, str], ...]

    def column(self, agent: str, name: str) -> list:
        return [row[name] for row in self.rows if row["agent"] == agent]

    def to_csv(self, path: str | Path) -> None:
        # csv.writer quoting matters: instance-subtree sweeps put JSON
        # (with commas) in the param column.
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(SWEEP_COLUMNS)
            for row in self.rows:
                cells = []
                for name in SWEEP_COLUMNS:
                    value = row[name]
                    cells.append(format(value, ".10g") if isinstance(value, float) else str(value))
                writer.writerow(cells)


def sweep(
    config_data: dict,
    param: str,
    values: list,
    workers: int | None = None,
) -> SweepResult:
    """Re-run the experiment with ``param`` (a dotted config path) set to
    each grid value; any config subtree can be swept, including the whole
    instance. Failed grid points are recorded and skipped."""
    if not values:
        raise ConfigError("sweep needs a nonempty list of values")
    rows: list[dict] = []
    failures: list[tuple[str, str]] = []
    for value in values:
        data = json.loads(json.dumps(config_data))  # deep copy, JSON-typed
        _substitute(data, param, value)  # a bad path is a template error
        tag = value if isinstance(value, (int, float, str)) else json.dumps(value)
        try:
            config = ExperimentConfig.from_dict(data)
            results = run_experiment(config, workers=workers)
        except Exception as exc:
            failures.append((str(tag), str(exc)))
            logger.warning("sweep point %r failed: %s", tag, exc)
            continue
        for label, result in results.items():
            finals = result.final_regrets
            positive = finals[finals > 0]
            invsqrt = float((1.0 / np.sqrt(positive)).mean()) if len(positive) else math.nan
            rows.append(
                {
                    "param": tag,
                    "agent": label,
                    "regret_mean": float(finals.mean()),
                    "regret_median": float(np.median(finals)),
                    "unsafe_mean": float(result.final_unsafe.mean()),
                    "unsafe_median": float(np.median(result.final_unsafe)),
                    "violation_mean": float(result.aggregate.violation_mean[-1]),
                    "invsqrt_regret_mean": invsqrt,
                }
            )
    return SweepResult(param=param, rows=tuple(rows), failures=tuple(failures))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _safe_filename(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)


def write_results(
    results: dict[str, AgentResult], out_dir: str | Path, config: ExperimentConfig
) -> list[Path]:
    """One CSV per agent plus a JSON sidecar with final pull counts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for label, result in results.items():
        stem = _safe_filename(label)
        csv_path = out_dir / f"{stem}.csv"
        result.aggregate.to_csv(csv_path)
        sidecar = {
            "agent": label,
            "horizon": config.horizon,
            "trials": result.trials_completed,
            "failures": result.failures,
            "mean_final_pulls": [float(x) for x in result.mean_final_pulls],
        }
        json_path = out_dir / f"{stem}_pulls.json"
        with open(json_path, "w", encoding="utf-8") as handle:
            json.dump(sidecar, handle, indent=2)
        written.extend([csv_path, json_path])
    return written
