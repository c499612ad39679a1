"""Bandit instances, pull accounting and pseudo-regret.

Arms are indexed from 0 throughout the package.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .exceptions import UsageError

__all__ = [
    "BanditInstance",
    "ArmStats",
    "BatchRecord",
    "RunTrace",
    "TraceBuilder",
    "draw_reward",
    "draw_successes",
    "pseudo_regret",
    "sample_batch",
    "update_stats",
    "checkpoint_grid",
]


@dataclass(frozen=True)
class BanditInstance:
    """Ground truth for a Bernoulli bandit: one success probability per arm."""

    means: tuple[float, ...]
    name: str = ""

    def __post_init__(self):
        means = tuple(float(m) for m in self.means)
        object.__setattr__(self, "means", means)
        if len(means) < 2:
            raise UsageError(f"an instance needs at least 2 arms, got {len(means)}")
        for i, m in enumerate(means):
            if not (0.0 <= m <= 1.0):
                raise UsageError(f"arm {i} mean {m!r} is outside [0, 1]")

    @property
    def num_arms(self) -> int:
        return len(self.means)

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @property
    def best_arm(self) -> int:
        return self.means.index(self.best_mean)

    @property
    def gaps(self) -> np.ndarray:
        best = self.best_mean
        return np.array([best - m for m in self.means])

    @property
    def min_gap(self) -> float:
        """Smallest nonzero gap, or 0.0 when every arm is optimal."""
        nonzero = [g for g in self.gaps if g > 0]
        return min(nonzero) if nonzero else 0.0

    def check_arm(self, arm: int) -> None:
        if not (0 <= arm < self.num_arms):
            raise UsageError(f"arm index {arm} out of range for {self.num_arms} arms")


@dataclass(frozen=True)
class ArmStats:
    """Pull count and success count for one arm.

    Means are kept as integer pairs so that ``empirical_mean * pulls`` is
    always the exact success count.
    """

    pulls: int = 0
    successes: int = 0

    @property
    def empirical_mean(self) -> float:
        return self.successes / self.pulls if self.pulls else 0.0


def update_stats(stats: ArmStats, successes: int, pulls: int) -> ArmStats:
    """Fold one batch of outcomes into ``stats``."""
    if pulls < 0 or successes < 0:
        raise UsageError("pulls and successes must be nonnegative")
    if successes > pulls:
        raise UsageError(f"successes ({successes}) exceed pulls ({pulls})")
    if pulls == 0:
        return stats
    return ArmStats(stats.pulls + int(pulls), stats.successes + int(successes))


def draw_reward(instance: BanditInstance, arm: int, rng: np.random.Generator) -> int:
    """One Bernoulli reward; consumes exactly one uniform from ``rng``."""
    instance.check_arm(arm)
    return int(rng.random() < instance.means[arm])


def draw_successes(
    instance: BanditInstance, arm: int, pulls: int, rng: np.random.Generator
) -> int:
    """Success count of ``pulls`` sequential pulls of ``arm`` (one uniform per pull)."""
    instance.check_arm(arm)
    if pulls <= 0:
        return 0
    return int(np.count_nonzero(rng.random(pulls) < instance.means[arm]))


def _as_counts(instance: BanditInstance, allocation) -> np.ndarray:
    counts = np.zeros(instance.num_arms, dtype=np.int64)
    if isinstance(allocation, Mapping):
        for arm, c in allocation.items():
            instance.check_arm(arm)
            counts[arm] += c
    else:
        allocation = np.asarray(allocation, dtype=np.int64)
        if allocation.shape != counts.shape:
            raise UsageError("allocation length does not match the number of arms")
        counts += allocation
    if (counts < 0).any():
        raise UsageError("pull counts must be nonnegative")
    return counts


def pseudo_regret(instance: BanditInstance, allocation) -> float:
    """Gap-weighted pull count: sum over arms of ``count_i * gap_i``.

    ``allocation`` is either a mapping arm -> count or a length-N sequence.
    """
    counts = _as_counts(instance, allocation)
    return float(counts @ instance.gaps)


def checkpoint_grid(horizon: int, base: int = 10) -> list[int]:
    """Powers of ``base`` strictly below ``horizon``, followed by ``horizon``."""
    if horizon < 1:
        raise UsageError("horizon must be positive")
    grid = []
    t = base
    while t < horizon:
        grid.append(t)
        t *= base
    grid.append(horizon)
    return grid


@dataclass(frozen=True)
class BatchRecord:
    batch_index: int
    start_time: int
    allocation: dict[int, int]
    outcomes: dict[int, tuple[int, int]]
    surviving: tuple[int, ...] | None = None

    @property
    def length(self) -> int:
        return sum(self.allocation.values())


@dataclass
class RunTrace:
    """Everything one replication did, stored as per-(batch, arm) segments.

    Segments are kept in pull order: batches in sequence, arms ascending inside
    a batch.  ``survivors[b]`` is the arm set batch ``b`` was allowed to pull
    (``None`` for algorithms without elimination).
    """

    instance: BanditInstance
    horizon: int
    seg_batch: np.ndarray
    seg_arm: np.ndarray
    seg_pulls: np.ndarray
    seg_successes: np.ndarray
    num_batches: int
    survivors: list[tuple[int, ...]] | None = None
    sequential: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def total_pulls(self) -> int:
        return int(self.seg_pulls.sum())

    @property
    def reported_batches(self) -> int:
        """Batch count under the reporting convention (sequential -> horizon)."""
        return self.horizon if self.sequential else self.num_batches

    def pulls_per_arm(self) -> np.ndarray:
        return np.bincount(self.seg_arm, weights=self.seg_pulls,
                           minlength=self.instance.num_arms).astype(np.int64)

    def successes_per_arm(self) -> np.ndarray:
        return np.bincount(self.seg_arm, weights=self.seg_successes,
                           minlength=self.instance.num_arms).astype(np.int64)

    def batch_lengths(self) -> np.ndarray:
        return np.bincount(self.seg_batch, weights=self.seg_pulls,
                           minlength=self.num_batches).astype(np.int64)

    @property
    def batches(self) -> list[BatchRecord]:
        records = []
        start = 0
        bounds = np.searchsorted(self.seg_batch, np.arange(self.num_batches + 1))
        for b in range(self.num_batches):
            lo, hi = bounds[b], bounds[b + 1]
            alloc = {}
            outcomes = {}
            for arm, n, s in zip(self.seg_arm[lo:hi], self.seg_pulls[lo:hi],
                                 self.seg_successes[lo:hi]):
                alloc[int(arm)] = alloc.get(int(arm), 0) + int(n)
                prev = outcomes.get(int(arm), (0, 0))
                outcomes[int(arm)] = (prev[0] + int(s), prev[1] + int(n))
            surv = self.survivors[b] if self.survivors is not None else None
            records.append(BatchRecord(b + 1, start, alloc, outcomes, surv))
            start += sum(alloc.values())
        return records

    def regret_at(self, times) -> np.ndarray:
        """Cumulative pseudo-regret after each of ``times`` pulls.

        Regret is linear within a segment (one arm), so interpolating the
        segment-boundary cumulative sums is exact.
        """
        cum_t = np.concatenate([[0], np.cumsum(self.seg_pulls)])
        cum_r = np.concatenate([[0.0], np.cumsum(self.seg_pulls * self.instance.gaps[self.seg_arm])])
        return np.interp(np.asarray(times, dtype=float), cum_t, cum_r)

    def checkpoints(self, grid: Sequence[int] | None = None) -> list[tuple[int, float]]:
        grid = checkpoint_grid(self.horizon) if grid is None else list(grid)
        return list(zip(grid, self.regret_at(grid).tolist()))

    @property
    def final_regret(self) -> float:
        return pseudo_regret(self.instance, self.pulls_per_arm())

    def violations(self) -> list[str]:
        """Conservation and elimination invariants that this trace breaks."""
        problems = []
        if self.total_pulls != self.horizon:
            problems.append(f"total pulls {self.total_pulls} != horizon {self.horizon}")
        if (self.seg_successes > self.seg_pulls).any() or (self.seg_pulls < 0).any():
            problems.append("segment with impossible outcome counts")
        if self.survivors is not None:
            if len(self.survivors) != self.num_batches:
                problems.append("survivor list length does not match batch count")
            else:
                for b, arm in zip(self.seg_batch, self.seg_arm):
                    if arm not in self.survivors[b]:
                        problems.append(f"batch {b + 1} pulled eliminated arm {arm}")
                        break
                for b in range(1, self.num_batches):
                    if not set(self.survivors[b]) <= set(self.survivors[b - 1]):
                        problems.append(f"surviving set grew at batch {b + 1}")
                        break
        return problems


class TraceBuilder:
    """Accumulates batches into a :class:`RunTrace`."""

    def __init__(self, instance: BanditInstance, horizon: int, track_survivors: bool = True):
        self.instance = instance
        self.horizon = horizon
        self._batch: list[int] = []
        self._arm: list[int] = []
        self._pulls: list[int] = []
        self._succ: list[int] = []
        self._survivors: list[tuple[int, ...]] | None = [] if track_survivors else None
        self.num_batches = 0
        self.elapsed = 0

    def add_batch(self, allocation: Mapping[int, int], successes: Mapping[int, int],
                  surviving: Sequence[int] | None = None) -> None:
        b = self.num_batches
        for arm in sorted(allocation):
            n = int(allocation[arm])
            if n == 0:
                continue
            self._batch.append(b)
            self._arm.append(arm)
            self._pulls.append(n)
            self._succ.append(int(successes.get(arm, 0)))
            self.elapsed += n
        if self._survivors is not None:
            self._survivors.append(tuple(surviving if surviving is not None
                                         else range(self.instance.num_arms)))
        self.num_batches += 1

    def build(self, **meta) -> RunTrace:
        return RunTrace(
            instance=self.instance,
            horizon=self.horizon,
            seg_batch=np.array(self._batch, dtype=np.int64),
            seg_arm=np.array(self._arm, dtype=np.int64),
            seg_pulls=np.array(self._pulls, dtype=np.int64),
            seg_successes=np.array(self._succ, dtype=np.int64),
            num_batches=self.num_batches,
            survivors=self._survivors,
            meta=meta,
        )


def sample_batch(instance: BanditInstance, allocation: Mapping[int, int],
                 rng: np.random.Generator) -> dict[int, int]:
    """Draw a batch's outcomes: arms ascending, pulls sequential within an arm."""
    return {arm: draw_successes(instance, arm, int(allocation[arm]), rng)
            for arm in sorted(allocation)}

