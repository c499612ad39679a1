"""Replication engine.

Every replication draws from its own Philox stream keyed by
``(master_seed, replication_index)``; Philox is counter-based, so the
counter advances once per 64-bit draw and the stream for replication ``k``
does not depend on which other replications ran, or where.  Aggregation is
a fold over per-replication summaries sorted by index, which makes
:func:`run_experiment` independent of ``jobs``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .baselines import (
    EliminationConfig,
    batched_elimination_run,
    improved_ucb_run,
    thompson_beta_run,
    thompson_gaussian_run,
    ucb1_run,
)
from .core import BanditInstance, RunTrace, checkpoint_grid
from .exceptions import UsageError
from .policies import PolicyConfig, run_policy

__all__ = [
    "ALGORITHMS",
    "ExperimentSpec",
    "AggregateResult",
    "ReplicationSummary",
    "TraceInvariantError",
    "replication_stream",
    "resolve_rounds",
    "run_once",
    "summarize",
    "run_experiment",
    "event_monitor",
]

_UINT64 = 2**64


class TraceInvariantError(RuntimeError):
    """A finished trace broke pull conservation or elimination monotonicity."""


def replication_stream(master_seed: int, replication_index: int) -> np.random.Generator:
    """Independent random stream for one replication."""
    if replication_index < 0:
        raise UsageError("replication_index must be nonnegative")
    key = np.array([master_seed % _UINT64, replication_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def resolve_rounds(rounds: int | str, horizon: int) -> int:
    """Round count from an integer or a rule name.

    ``"log"`` gives ``ceil(log2 T)``; ``"loglog"`` gives
    ``max(1, ceil(log2 log2 T) - 1)``.
    """
    if isinstance(rounds, str):
        if rounds == "log":
            return max(1, math.ceil(math.log2(horizon)))
        if rounds == "loglog":
            if horizon < 4:
                return 1
            return max(1, math.ceil(math.log2(math.log2(horizon))) - 1)
        try:
            rounds = int(rounds)
        except ValueError:
            raise UsageError(f"rounds must be an integer, 'log' or 'loglog', got {rounds!r}") from None
    if rounds < 1:
        raise UsageError("rounds must be at least 1")
    return int(rounds)


def _policy(kind: str, no_prune: bool) -> Callable:
    def run(instance, horizon, params, rng):
        beta = math.inf if (no_prune or params.get("no_prune")) else float(params.get("beta", 100.0))
        config = PolicyConfig(
            horizon=horizon,
            alpha=float(params.get("alpha", 1.0)),
            beta=beta,
            num_rounds=resolve_rounds(params.get("rounds", 20), horizon),
            skip_init_batch=bool(params.get("skip_init", False)) and kind == "btsi",
            theory_alpha=bool(params.get("theory_alpha", False)),
        )
        return run_policy(instance, config, rng, kind)
    return run


def _elimination(grid_kind: str) -> Callable:
    def run(instance, horizon, params, rng):
        config = EliminationConfig(
            grid_kind=grid_kind,
            num_rounds=resolve_rounds(params.get("rounds", 20), horizon),
            confidence_scale=float(params.get("confidence_scale", 1.0)),
        )
        return batched_elimination_run(instance, horizon, config, rng)
    return run


def _gaussian_ts(instance, horizon, params, rng):
    alpha = math.log(2 * horizon) if params.get("theory_alpha") else float(params.get("alpha", 1.0))
    return thompson_gaussian_run(instance, horizon, rng, alpha)


ALGORITHMS: dict[str, Callable[[BanditInstance, int, dict, np.random.Generator], RunTrace]] = {
    "btsd": _policy("btsd", no_prune=False),
    "btsd-": _policy("btsd", no_prune=True),
    "btsi": _policy("btsi", no_prune=False),
    "btsi-": _policy("btsi", no_prune=True),
    "ts": lambda instance, horizon, params, rng: thompson_beta_run(instance, horizon, rng),
    "ts-gaussian": _gaussian_ts,
    "ucb1": lambda instance, horizon, params, rng: ucb1_run(instance, horizon, rng),
    "elim-geometric": _elimination("geometric"),
    "elim-minimax": _elimination("minimax"),
    "ucbi": lambda instance, horizon, params, rng: improved_ucb_run(instance, horizon, rng),
}


def check_algorithm(name: str) -> None:
    if name not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {name!r}; valid: {', '.join(ALGORITHMS)}")


@dataclass(frozen=True)
class ExperimentSpec:
    instance: BanditInstance
    algorithm: str
    horizon: int
    repetitions: int = 100
    master_seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)
    checkpoints: tuple[int, ...] = ()

    def __post_init__(self):
        check_algorithm(self.algorithm)
        if self.horizon < 1:
            raise UsageError("horizon must be positive")
        if self.repetitions < 1:
            raise UsageError("repetitions must be at least 1")
        grid = tuple(self.checkpoints) or tuple(checkpoint_grid(self.horizon))
        if list(grid) != sorted(grid) or grid[-1] != self.horizon or grid[0] < 0:
            raise UsageError("checkpoints must be sorted, within [0, horizon] and end at horizon")
        object.__setattr__(self, "checkpoints", grid)

    def to_dict(self) -> dict:
        return {
            "dataset": self.instance.name,
            "means": list(self.instance.means),
            "algorithm": self.algorithm,
            "horizon": self.horizon,
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
            "params": dict(sorted(self.params.items())),
            "checkpoints": list(self.checkpoints),
        }


def run_once(spec: ExperimentSpec, replication_index: int) -> RunTrace:
    """Run replication ``replication_index`` of ``spec`` and check its invariants."""
    if not (0 <= replication_index < spec.repetitions):
        raise UsageError(f"replication_index must lie in [0, {spec.repetitions})")
    rng = replication_stream(spec.master_seed, replication_index)
    trace = ALGORITHMS[spec.algorithm](spec.instance, spec.horizon, spec.params, rng)
    problems = trace.violations()
    if problems:
        raise TraceInvariantError(f"{spec.algorithm} replication {replication_index}: "
                                  + "; ".join(problems))
    return trace


def event_monitor(trace: RunTrace, instance: BanditInstance | None = None) -> bool:
    """Whether every empirical mean stayed within ``sqrt(ln(2T) / n)`` of the truth.

    Checked for every arm each time a batch changes its counts, which covers
    every batch boundary.
    """
    instance = instance or trace.instance
    log_term = math.log(2 * trace.horizon)
    for arm in range(instance.num_arms):
        mask = trace.seg_arm == arm
        if not mask.any():
            continue
        n = np.cumsum(trace.seg_pulls[mask])
        s = np.cumsum(trace.seg_successes[mask])
        dev = np.abs(s / n - instance.means[arm])
        if (dev > np.sqrt(log_term / n)).any():
            return False
    return True


@dataclass(frozen=True)
class ReplicationSummary:
    index: int
    regrets: np.ndarray
    batches: int
    policy_changes: int
    event_holds: bool


def summarize(spec: ExperimentSpec, replication_index: int) -> ReplicationSummary:
    trace = run_once(spec, replication_index)
    return ReplicationSummary(
        index=replication_index,
        regrets=trace.regret_at(spec.checkpoints),
        batches=trace.reported_batches,
        policy_changes=trace.num_batches - trace.meta.get("init_batches", 0),
        event_holds=event_monitor(trace),
    )


def _summarize_star(args):
    return summarize(*args)


@dataclass(frozen=True)
class AggregateResult:
    checkpoints: tuple[int, ...]
    mean_regret: np.ndarray
    std_regret: np.ndarray
    mean_batches: float
    min_batches: int
    max_batches: int
    final_regrets: np.ndarray
    batch_counts: np.ndarray
    policy_changes: np.ndarray
    event_rate: float

    @property
    def final_mean_regret(self) -> float:
        return float(self.mean_regret[-1])

    def to_dict(self) -> dict:
        return {
            "checkpoints": list(self.checkpoints),
            "mean_regret": self.mean_regret.tolist(),
            "std_regret": self.std_regret.tolist(),
            "mean_batches": self.mean_batches,
            "min_batches": self.min_batches,
            "max_batches": self.max_batches,
            "final_regrets": self.final_regrets.tolist(),
        }


def aggregate(spec: ExperimentSpec, summaries) -> AggregateResult:
    summaries = sorted(summaries, key=lambda s: s.index)
    regrets = np.vstack([s.regrets for s in summaries])
    batches = np.array([s.batches for s in summaries], dtype=np.int64)
    return AggregateResult(
        checkpoints=spec.checkpoints,
        mean_regret=regrets.mean(axis=0),
        std_regret=regrets.std(axis=0),
        mean_batches=float(batches.mean()),
        min_batches=int(batches.min()),
        max_batches=int(batches.max()),
        final_regrets=regrets[:, -1].copy(),
        batch_counts=batches,
        policy_changes=np.array([s.policy_changes for s in summaries], dtype=np.int64),
        event_rate=float(np.mean([s.event_holds for s in summaries])),
    )


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> AggregateResult:
    """All replications of ``spec``, aggregated.  ``jobs > 1`` uses worker processes."""
    indices = range(spec.repetitions)
    if jobs > 1 and spec.repetitions > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, spec.repetitions // (4 * jobs))
            summaries = list(pool.map(_summarize_star, [(spec, i) for i in indices],
                                      chunksize=chunk))
    else:
        summaries = [summarize(spec, i) for i in indices]
    return aggregate(spec, summaries)
