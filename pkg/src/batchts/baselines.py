"""Comparison algorithms: sequential TS (Beta and Gaussian beliefs) and UCB1, batched successive
elimination on a geometric or a minimax grid, and batched improved-UCB.

The two sequential algorithms run in numba kernels.  numba's
``np.random.Generator`` support reproduces numpy's draws, so the kernels
consume the same stream a pure-numpy loop would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numba
import numpy as np

from .core import ArmStats, BanditInstance, RunTrace, TraceBuilder, sample_batch, update_stats
from .exceptions import UsageError
from .policies import allocate, btsd_gamma, btsi_grid

__all__ = [
    "EliminationConfig",
    "ImprovedUCBConfig",
    "thompson_beta_run",
    "thompson_gaussian_run",
    "ucb1_run",
    "batched_elimination_run",
    "improved_ucb_run",
]


@numba.njit(cache=True)
def _ts_kernel(rng, means, horizon, prior_a, prior_b, arms, rewards):
    n_arms = means.shape[0]
    a = prior_a.copy()
    b = prior_b.copy()
    for t in range(horizon):
        best = 0
        best_val = -1.0
        for i in range(n_arms):
            v = rng.beta(a[i], b[i])
            if v > best_val:
                best_val = v
                best = i
        r = 1 if rng.random() < means[best] else 0
        arms[t] = best
        rewards[t] = r
        a[best] += r
        b[best] += 1 - r


@numba.njit(cache=True)
def _gaussian_ts_kernel(rng, means, horizon, alpha, arms, rewards):
    n_arms = means.shape[0]
    pulls = np.zeros(n_arms)
    wins = np.zeros(n_arms)
    for t in range(horizon):
        if t < n_arms:
            best = t
        else:
            best = 0
            best_val = -np.inf
            for i in range(n_arms):
                v = wins[i] / pulls[i] + math.sqrt(alpha / pulls[i]) * rng.standard_normal()
                if v > best_val:
                    best_val = v
                    best = i
        r = 1 if rng.random() < means[best] else 0
        arms[t] = best
        rewards[t] = r
        pulls[best] += 1.0
        wins[best] += r


@numba.njit(cache=True)
def _ucb1_kernel(rng, means, horizon, arms, rewards):
    n_arms = means.shape[0]
    pulls = np.zeros(n_arms)
    wins = np.zeros(n_arms)
    for t in range(horizon):
        if t < n_arms:
            best = t
        else:
            best = 0
            best_val = -1.0
            log_t = math.log(t)
            for i in range(n_arms):
                v = wins[i] / pulls[i] + math.sqrt(2.0 * log_t / pulls[i])
                if v > best_val:
                    best_val = v
                    best = i
        r = 1 if rng.random() < means[best] else 0
        arms[t] = best
        rewards[t] = r
        pulls[best] += 1.0
        wins[best] += r


def _sequential_trace(instance: BanditInstance, horizon: int, arms: np.ndarray,
                      rewards: np.ndarray, **meta) -> RunTrace:
    return RunTrace(
        instance=instance,
        horizon=horizon,
        seg_batch=np.arange(horizon, dtype=np.int64),
        seg_arm=arms,
        seg_pulls=np.ones(horizon, dtype=np.int64),
        seg_successes=rewards,
        num_batches=horizon,
        survivors=None,
        sequential=True,
        meta=meta,
    )


def thompson_beta_run(instance: BanditInstance, horizon: int, rng: np.random.Generator,
                      prior: tuple[np.ndarray, np.ndarray] | None = None) -> RunTrace:
    """Fully sequential Bernoulli Thompson sampling.

    Each step draws one Beta sample per arm (ascending arm order), pulls the
    largest (ties to the lower index) and then draws the reward uniform.
    ``prior`` defaults to Beta(1, 1) on every arm.
    """
    if horizon < 1:
        raise UsageError("horizon must be positive")
    n = instance.num_arms
    if prior is None:
        prior_a, prior_b = np.ones(n), np.ones(n)
    else:
        prior_a, prior_b = (np.asarray(p, dtype=float) for p in prior)
        if prior_a.shape != (n,) or prior_b.shape != (n,):
            raise UsageError("prior arrays must have one entry per arm")
    arms = np.empty(horizon, dtype=np.int64)
    rewards = np.empty(horizon, dtype=np.int64)
    _ts_kernel(rng, np.asarray(instance.means), horizon, prior_a, prior_b, arms, rewards)
    return _sequential_trace(instance, horizon, arms, rewards, kind="ts")


def thompson_gaussian_run(instance: BanditInstance, horizon: int, rng: np.random.Generator,
                          alpha: float = 1.0) -> RunTrace:
    """Sequential Thompson sampling with Gaussian beliefs ``N(mean_i, alpha / n_i)``.

    This is the per-pull counterpart of the batched policies: one pull per arm
    first, then every step samples each belief and pulls the largest.
    """
    if horizon < instance.num_arms:
        raise UsageError(f"Gaussian TS needs horizon >= {instance.num_arms} arms, got {horizon}")
    if not alpha > 0:
        raise UsageError("alpha must be positive")
    arms = np.empty(horizon, dtype=np.int64)
    rewards = np.empty(horizon, dtype=np.int64)
    _gaussian_ts_kernel(rng, np.asarray(instance.means), horizon, float(alpha), arms, rewards)
    return _sequential_trace(instance, horizon, arms, rewards, kind="ts-gaussian")


def ucb1_run(instance: BanditInstance, horizon: int, rng: np.random.Generator) -> RunTrace:
    """UCB1: one pull per arm, then ``argmax mean_i + sqrt(2 ln t / n_i)``."""
    if horizon < instance.num_arms:
        raise UsageError(f"UCB1 needs horizon >= {instance.num_arms} arms, got {horizon}")
    arms = np.empty(horizon, dtype=np.int64)
    rewards = np.empty(horizon, dtype=np.int64)
    _ucb1_kernel(rng, np.asarray(instance.means), horizon, arms, rewards)
    return _sequential_trace(instance, horizon, arms, rewards, kind="ucb1")


@dataclass(frozen=True)
class EliminationConfig:
    grid_kind: Literal["geometric", "minimax"] = "geometric"
    num_rounds: int = 20
    confidence_scale: float = 1.0

    def __post_init__(self):
        if self.grid_kind not in ("geometric", "minimax"):
            raise UsageError(f"grid_kind must be 'geometric' or 'minimax', got {self.grid_kind!r}")
        if self.num_rounds < 1:
            raise UsageError("num_rounds must be at least 1")
        if not self.confidence_scale > 0:
            raise UsageError("confidence_scale must be positive")


def _even_split(arms, length: int) -> dict[int, int]:
    arms = list(arms)
    return dict(zip(arms, allocate([1.0] * len(arms), length)))


def _run_batch(instance, rng, builder, stats, alloc, surviving):
    outcomes = sample_batch(instance, alloc, rng)
    builder.add_batch(alloc, outcomes, surviving)
    for arm, n in alloc.items():
        stats[arm] = update_stats(stats[arm], outcomes[arm], n)


def batched_elimination_run(instance: BanditInstance, horizon: int, config: EliminationConfig,
                            rng: np.random.Generator) -> RunTrace:
    """Batched successive elimination.

    Each batch pulls every surviving arm equally (leftovers to lower indices).
    Afterwards arm ``i`` is dropped when
    ``max_j mean_j - mean_i >= 2 * c * sqrt(ln(2 N T) / (2 n_i))``.
    """
    n_arms = instance.num_arms
    if horizon < n_arms:
        raise UsageError(f"horizon ({horizon}) is smaller than the number of arms ({n_arms})")
    log_term = math.log(2 * n_arms * horizon)
    stats = [ArmStats() for _ in range(n_arms)]
    surviving = list(range(n_arms))
    builder = TraceBuilder(instance, horizon)

    if config.grid_kind == "minimax" and horizon > n_arms:
        boundaries = btsi_grid(horizon, n_arms, config.num_rounds)
    else:
        boundaries = None
    gamma = btsd_gamma(horizon, config.num_rounds)

    r = 1
    while builder.elapsed < horizon:
        remaining = horizon - builder.elapsed
        if len(surviving) == 1:
            length = remaining
        elif boundaries is not None:
            length = next(t for t in boundaries if t > builder.elapsed) - builder.elapsed
        elif r >= config.num_rounds:
            length = remaining
        else:
            length = min(math.ceil(len(surviving) * gamma ** r * (1 - 1e-12)), remaining)
        # every arm needs one pull before it has a mean
        length = max(length, min(len(surviving), remaining))
        _run_batch(instance, rng, builder, stats,
                   _even_split(surviving, length), tuple(surviving))
        best = max(stats[i].empirical_mean for i in surviving)
        scale = 2.0 * config.confidence_scale
        surviving = [
            i for i in surviving
            if best - stats[i].empirical_mean < scale * math.sqrt(log_term / (2 * stats[i].pulls))
        ]
        r += 1
    return builder.build(kind=f"elim-{config.grid_kind}", init_batches=0)


@dataclass(frozen=True)
class ImprovedUCBConfig:
    """Round ``m`` targets ``pull_scale * ln(T d^2) / d^2`` pulls per arm with
    ``d = 2**-m``; the confidence radius is ``sqrt(radius_scale * ln(T d^2) / n_m)``."""

    pull_scale: float = 2.0
    radius_scale: float = 0.5


def improved_ucb_run(instance: BanditInstance, horizon: int, rng: np.random.Generator,
                     config: ImprovedUCBConfig = ImprovedUCBConfig()) -> RunTrace:
    """Improved-UCB with one batch per halving round."""
    n_arms = instance.num_arms
    if horizon < n_arms:
        raise UsageError(f"horizon ({horizon}) is smaller than the number of arms ({n_arms})")
    stats = [ArmStats() for _ in range(n_arms)]
    surviving = list(range(n_arms))
    builder = TraceBuilder(instance, horizon)
    m = 0
    while builder.elapsed < horizon:
        remaining = horizon - builder.elapsed
        d = 2.0 ** -m
        log_term = math.log(horizon * d * d)
        if len(surviving) == 1 or log_term <= 0:
            _run_batch(instance, rng, builder, stats,
                       _even_split(surviving, remaining), tuple(surviving))
            break
        target = math.ceil(config.pull_scale * log_term / (d * d))
        alloc = {i: max(0, target - stats[i].pulls) for i in surviving}
        needed = sum(alloc.values())
        if needed >= remaining:
            _run_batch(instance, rng, builder, stats,
                       _even_split(surviving, remaining), tuple(surviving))
            break
        if needed:
            _run_batch(instance, rng, builder, stats, alloc, tuple(surviving))
        radius = math.sqrt(config.radius_scale * log_term / target)
        best_lower = max(stats[i].empirical_mean for i in surviving) - radius
        surviving = [i for i in surviving if stats[i].empirical_mean + radius >= best_lower]
        m += 1
    return builder.build(kind="ucbi", init_batches=0, rounds_used=m)
