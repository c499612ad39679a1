"""Batched Thompson sampling: the instance-dependent (BTSD) and the
instance-independent (BTSI) policies.

Both policies share one planning pipeline per batch:

1. compute ``q_i``, the probability that arm ``i``'s Gaussian belief
   ``N(mean_i, alpha / pulls_i)`` exceeds every other surviving arm's;
2. prune arms with ``q_i < max_j q_j / beta``;
3. split the batch among the survivors proportionally to ``q``.

They differ only in batch lengths: BTSD grows batches geometrically
(``ceil(|survivors| * gamma**r)`` with ``gamma = T**(1/M)``), BTSI follows a
fixed grid that grows doubly exponentially.  Setting ``beta = inf`` disables
pruning (the BTSD-/BTSI- variants).

A planner never touches random numbers; :func:`run_policy` owns the reward
stream and feeds outcomes back through :func:`ingest_batch`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .argmax import argmax_prob_arrays
from .core import ArmStats, BanditInstance, RunTrace, TraceBuilder, sample_batch, update_stats
from .exceptions import UsageError

__all__ = [
    "PolicyConfig",
    "PolicyState",
    "BatchPlan",
    "btsd_gamma",
    "btsi_grid",
    "prune",
    "allocate",
    "initial_state",
    "btsd_next_batch",
    "btsi_next_batch",
    "ingest_batch",
    "run_policy",
    "run_btsd",
    "run_btsi",
]


@dataclass(frozen=True)
class PolicyConfig:
    horizon: int
    alpha: float = 1.0
    beta: float = 100.0
    num_rounds: int = 20
    skip_init_batch: bool = False
    theory_alpha: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise UsageError("horizon must be positive")
        if self.num_rounds < 1:
            raise UsageError("num_rounds must be at least 1")
        if not self.alpha > 0:
            raise UsageError("alpha must be positive")
        if not self.beta >= 1:
            raise UsageError("beta must be >= 1 (use math.inf to disable pruning)")

    @property
    def effective_alpha(self) -> float:
        return math.log(2 * self.horizon) if self.theory_alpha else self.alpha


@dataclass(frozen=True)
class PolicyState:
    surviving: tuple[int, ...]
    stats: tuple[ArmStats, ...]
    round: int = 0
    elapsed: int = 0
    grid: tuple[int, ...] = ()

    @property
    def num_arms(self) -> int:
        return len(self.stats)


@dataclass(frozen=True)
class BatchPlan:
    allocation: dict[int, int]
    is_final: bool
    surviving: tuple[int, ...]
    q: dict[int, float] = field(default_factory=dict)

    @property
    def length(self) -> int:
        return sum(self.allocation.values())


def btsd_gamma(horizon: int, num_rounds: int) -> float:
    """Geometric growth factor ``T**(1/M)``."""
    if horizon < 1 or num_rounds < 1:
        raise UsageError("horizon and num_rounds must be positive")
    return float(horizon) ** (1.0 / num_rounds)


def btsi_grid(horizon: int, num_arms: int, num_rounds: int) -> list[int]:
    """Batch boundaries ``[T1, ..., T_{M+1}]`` of the instance-independent policy.

    With ``a = (T - N)**(1 / (2 - 2**(1 - M)))``, ``u_1 = a`` and
    ``u_r = a * sqrt(u_{r-1})``, the boundaries are ``T1 = N`` and
    ``T_r = floor(u_{r-1}) + N``; the last one is pinned to ``T`` and
    duplicates are dropped.
    """
    if horizon <= num_arms:
        raise UsageError(f"horizon ({horizon}) must exceed the number of arms ({num_arms})")
    if num_rounds < 1:
        raise UsageError("num_rounds must be at least 1")
    a = float(horizon - num_arms) ** (1.0 / (2.0 - 2.0 ** (1 - num_rounds)))
    grid = [num_arms]
    u = a
    for _ in range(num_rounds):
        grid.append(min(int(math.floor(u)) + num_arms, horizon))
        u = a * math.sqrt(u)
    grid[-1] = horizon
    out = []
    for t in grid:
        if not out or t > out[-1]:
            out.append(t)
    return out


def prune(q: Sequence[float], beta: float) -> list[int]:
    """Positions ``i`` with ``q[i] >= max(q) / beta``."""
    if len(q) == 0:
        raise UsageError("prune needs at least one probability")
    threshold = max(q) / beta
    return [i for i, qi in enumerate(q) if qi >= threshold]


def allocate(q_hat: Sequence[float], length: int) -> list[int]:
    """Largest-remainder rounding of ``q_hat * length`` to integers summing to ``length``.

    Leftover pulls go to the largest fractional parts, lower index first on ties.
    """
    q = np.asarray(q_hat, dtype=float)
    if (q < 0).any():
        raise UsageError("allocation weights must be nonnegative")
    if length < 0:
        raise UsageError("length must be nonnegative")
    total = q.sum()
    if not total > 0:
        raise UsageError("allocation weights must not all be zero")
    share = q / total * length
    counts = np.floor(share).astype(np.int64)
    extra = int(length - counts.sum())
    if extra:
        frac = share - counts
        order = sorted(range(len(q)), key=lambda i: (-frac[i], i))
        for i in order[:extra]:
            counts[i] += 1
    return counts.tolist()


def initial_state(num_arms: int, config: PolicyConfig, kind: str = "btsd") -> PolicyState:
    """Fresh state; BTSI states carry their precomputed grid."""
    if config.horizon < num_arms:
        raise UsageError(f"horizon ({config.horizon}) is smaller than the number of arms ({num_arms})")
    grid = ()
    skip = kind == "btsi" and config.skip_init_batch
    if kind == "btsi":
        grid = tuple(btsi_grid(config.horizon, num_arms, config.num_rounds))
        if skip:
            # the init boundary T1 = N is dropped; the first batch runs to T2
            grid = grid[1:]
    start_round = 1 if skip else 0
    return PolicyState(
        surviving=tuple(range(num_arms)),
        stats=tuple(ArmStats() for _ in range(num_arms)),
        round=start_round,
        grid=grid,
    )


def _check_open(state: PolicyState, config: PolicyConfig) -> None:
    if state.elapsed >= config.horizon:
        raise UsageError("horizon already exhausted; no further batches")


def _init_plan(state: PolicyState, config: PolicyConfig) -> BatchPlan:
    alloc = {i: 1 for i in state.surviving}
    return BatchPlan(alloc, state.elapsed + len(alloc) >= config.horizon, state.surviving)


def _score(state: PolicyState, config: PolicyConfig) -> tuple[list[int], dict[int, float]]:
    """Argmax probabilities over the survivors, then the pruned survivor list."""
    arms = list(state.surviving)
    if len(arms) == 1:
        return arms, {arms[0]: 1.0}
    pulls = np.array([state.stats[i].pulls for i in arms], dtype=float)
    means = np.array([state.stats[i].empirical_mean for i in arms])
    q = argmax_prob_arrays(means, np.sqrt(config.effective_alpha / pulls))
    keep = [arms[k] for k in prune(q, config.beta)]
    return keep, {arm: float(qi) for arm, qi in zip(arms, q)}


def _split(q: Mapping[int, float], keep: Sequence[int], length: int) -> dict[int, int]:
    counts = allocate([q[i] for i in keep], length)
    return dict(zip(keep, counts))


def _ceil(x: float) -> int:
    # absorb float noise such as 2 * 1024**0.1 == 4.000000000000001
    return math.ceil(x * (1.0 - 1e-12))


def btsd_next_batch(state: PolicyState, config: PolicyConfig) -> BatchPlan:
    """Plan the next batch of the geometric-schedule policy."""
    _check_open(state, config)
    if state.round == 0:
        return _init_plan(state, config)
    keep, q = _score(state, config)
    remaining = config.horizon - state.elapsed
    if len(keep) == 1 or state.round >= config.num_rounds:
        length = remaining
    else:
        gamma = btsd_gamma(config.horizon, config.num_rounds)
        length = min(_ceil(len(keep) * gamma ** state.round), remaining)
    return BatchPlan(_split(q, keep, length), length == remaining, tuple(keep), q)


def btsi_next_batch(state: PolicyState, config: PolicyConfig) -> BatchPlan:
    """Plan the next batch of the fixed-grid policy.

    Grid points that do not advance past ``elapsed`` are skipped, so duplicate
    boundaries never produce empty batches.
    """
    _check_open(state, config)
    if state.round == 0:
        return _init_plan(state, config)
    grid = state.grid or tuple(btsi_grid(config.horizon, state.num_arms, config.num_rounds))
    remaining = config.horizon - state.elapsed
    target = next(t for t in grid if t > state.elapsed)
    if any(state.stats[i].pulls == 0 for i in state.surviving):
        # merged first batch: no beliefs exist yet, pull uniformly
        keep = list(state.surviving)
        length = target - state.elapsed
        uniform = {i: 1.0 for i in keep}
        return BatchPlan(_split(uniform, keep, length), length == remaining, tuple(keep))
    keep, q = _score(state, config)
    length = remaining if len(keep) == 1 else target - state.elapsed
    return BatchPlan(_split(q, keep, length), length == remaining, tuple(keep), q)


def ingest_batch(state: PolicyState, plan: BatchPlan, outcomes: Mapping[int, int]) -> PolicyState:
    """Fold a batch's success counts into ``state`` and advance the round."""
    stats = list(state.stats)
    for arm, succ in outcomes.items():
        if arm not in plan.allocation and succ:
            raise UsageError(f"outcome reported for arm {arm}, which was not in the plan")
    for arm, n in plan.allocation.items():
        succ = int(outcomes.get(arm, 0))
        if succ > n:
            raise UsageError(f"arm {arm}: {succ} successes reported for {n} pulls")
        stats[arm] = update_stats(stats[arm], succ, n)
    return replace(
        state,
        surviving=plan.surviving,
        stats=tuple(stats),
        round=state.round + 1,
        elapsed=state.elapsed + plan.length,
    )


def run_policy(instance: BanditInstance, config: PolicyConfig, rng: np.random.Generator,
               kind: str = "btsd") -> RunTrace:
    """Drive one policy against ``instance`` until the horizon is spent."""
    planners: dict[str, Callable[[PolicyState, PolicyConfig], BatchPlan]] = {
        "btsd": btsd_next_batch,
        "btsi": btsi_next_batch,
    }
    if kind not in planners:
        raise UsageError(f"unknown policy kind {kind!r}; expected one of {sorted(planners)}")
    next_batch = planners[kind]
    state = initial_state(instance.num_arms, config, kind)
    init_batches = 0 if state.round == 1 else 1
    builder = TraceBuilder(instance, config.horizon)
    while state.elapsed < config.horizon:
        plan = next_batch(state, config)
        outcomes = sample_batch(instance, plan.allocation, rng)
        builder.add_batch(plan.allocation, outcomes, plan.surviving)
        state = ingest_batch(state, plan, outcomes)
    return builder.build(kind=kind, init_batches=init_batches,
                         alpha=config.effective_alpha, rounds_used=state.round)


def run_btsd(instance: BanditInstance, config: PolicyConfig, rng: np.random.Generator) -> RunTrace:
    return run_policy(instance, config, rng, "btsd")


def run_btsi(instance: BanditInstance, config: PolicyConfig, rng: np.random.Generator) -> RunTrace:
    return run_policy(instance, config, rng, "btsi")
