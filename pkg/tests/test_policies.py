import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from batchts.core import ArmStats, BanditInstance
from batchts.exceptions import UsageError
from batchts.ingest import builtin
from batchts.policies import (
    BatchPlan,
    PolicyConfig,
    PolicyState,
    allocate,
    btsd_gamma,
    btsd_next_batch,
    btsi_grid,
    btsi_next_batch,
    ingest_batch,
    initial_state,
    prune,
    run_policy,
)
from batchts.simulator import replication_stream


def grid_oracle(T, N, M):
    mpmath.mp.dps = 30
    a = mpmath.mpf(T - N) ** (1 / (2 - mpmath.mpf(2) ** (1 - M)))
    us = [a]
    for _ in range(M - 1):
        us.append(a * mpmath.sqrt(us[-1]))
    grid = [N] + [min(int(mpmath.floor(u)) + N, T) for u in us]
    grid[-1] = T
    return sorted(set(grid))


def test_gamma_examples():
    assert btsd_gamma(10**6, 20) == pytest.approx(float(mpmath.mpf(10) ** 0.3), rel=1e-14)
    assert btsd_gamma(10**6, 20) == pytest.approx(1.99526, abs=1e-5)
    assert btsd_gamma(777, 1) == 777
    assert btsd_gamma(1024, 10) == pytest.approx(2.0, rel=1e-15)


def test_grid_examples():
    assert btsi_grid(100, 2, 2) == [2, 23, 100]
    assert btsi_grid(1000, 3, 1) == [3, 1000]
    with pytest.raises(UsageError):
        btsi_grid(2, 2, 3)


@pytest.mark.parametrize("T, N, M", [(10**3, 2, 2), (10**4, 2, 3), (10**5, 10, 3),
                                     (10**6, 4, 5), (50, 10, 6), (10**5, 2, 20)])
def test_grid_matches_oracle(T, N, M):
    grid = btsi_grid(T, N, M)
    assert grid == grid_oracle(T, N, M)
    assert grid[-1] == T
    assert all(b > a for a, b in zip(grid, grid[1:]))
    assert len(grid) <= M + 1


def test_prune_examples():
    assert prune([0.6, 0.399, 0.001], 100) == [0, 1]
    assert prune([0.5, 0.5], 1.0) == [0, 1]
    assert prune([0.99, 0.01], 100) == [0, 1]
    assert prune([0.99, 0.01], 50) == [0]
    assert prune([0.3, 0.7], math.inf) == [0, 1]


@given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.floats(1, 1e6))
def test_prune_keeps_argmax(q, beta):
    assert int(np.argmax(q)) in prune(q, beta)


def test_allocate_examples():
    assert allocate([0.7, 0.3], 10) == [7, 3]
    assert allocate([0.55, 0.45], 9) == [5, 4]
    assert allocate([1 / 3] * 3, 10) == [4, 3, 3]
    with pytest.raises(UsageError):
        allocate([0.5, -0.1], 4)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=16).filter(lambda q: sum(q) > 0),
       st.integers(0, 10**6))
def test_allocate_is_exact_and_close(q, length):
    counts = allocate(q, length)
    assert sum(counts) == length
    share = np.array(q) / sum(q) * length
    assert (np.abs(np.array(counts) - share) < 1 + 1e-9).all()


def _state(stats, elapsed, surviving=None, round_=1, grid=()):
    surviving = tuple(range(len(stats))) if surviving is None else surviving
    return PolicyState(surviving, tuple(ArmStats(*s) for s in stats), round_, elapsed, grid)


def test_btsd_single_survivor_finishes():
    cfg = PolicyConfig(horizon=1000)
    plan = btsd_next_batch(_state([(200, 150), (100, 10)], 300, surviving=(0,), round_=4), cfg)
    assert plan.allocation == {0: 700} and plan.is_final


def test_btsd_first_round_after_init():
    cfg = PolicyConfig(horizon=10**4, num_rounds=10)
    plan = btsd_next_batch(_state([(1, 1), (1, 1)], 2), cfg)
    assert plan.allocation == {0: 3, 1: 3} and not plan.is_final


def test_btsd_identical_stats_split_evenly():
    cfg = PolicyConfig(horizon=10**5, num_rounds=8)
    plan = btsd_next_batch(_state([(40, 20), (40, 20)], 80, round_=3), cfg)
    a, b = plan.allocation[0], plan.allocation[1]
    assert a - b in (0, 1)
    assert a + b == math.ceil(2 * 10 ** (5 * 3 / 8))


def test_btsd_last_round_takes_the_rest():
    cfg = PolicyConfig(horizon=500, num_rounds=3)
    plan = btsd_next_batch(_state([(10, 5), (10, 4)], 20, round_=3), cfg)
    assert plan.length == 480 and plan.is_final


def test_planner_rejects_exhausted_horizon():
    cfg = PolicyConfig(horizon=10)
    with pytest.raises(UsageError):
        btsd_next_batch(_state([(5, 1), (5, 2)], 10), cfg)


def _drive(kind, cfg, instance, outcome_rule):
    state = initial_state(instance.num_arms, cfg, kind)
    plan_fn = btsd_next_batch if kind == "btsd" else btsi_next_batch
    plans = []
    while state.elapsed < cfg.horizon:
        plan = plan_fn(state, cfg)
        plans.append(plan)
        state = ingest_batch(state, plan, {a: outcome_rule(a, n) for a, n in plan.allocation.items()})
    return plans, state


def test_btsi_batch_lengths():
    inst = BanditInstance((0.5, 0.5))
    cfg = PolicyConfig(horizon=100, num_rounds=2)
    plans, _ = _drive("btsi", cfg, inst, lambda a, n: n // 2)
    assert [p.length for p in plans] == [2, 21, 77]


def test_btsi_skip_init_merges_first_batch():
    inst = BanditInstance((0.5, 0.5))
    cfg = PolicyConfig(horizon=100, num_rounds=2, skip_init_batch=True)
    plans, _ = _drive("btsi", cfg, inst, lambda a, n: n // 2)
    assert plans[0].allocation == {0: 12, 1: 11}
    assert [p.length for p in plans] == [23, 77]


def test_btsi_single_survivor_finishes():
    cfg = PolicyConfig(horizon=10**4, num_rounds=4)
    grid = tuple(btsi_grid(10**4, 2, 4))
    plan = btsi_next_batch(_state([(30, 30), (30, 0)], 60, surviving=(0,), round_=2, grid=grid), cfg)
    assert plan.allocation == {0: 10**4 - 60} and plan.is_final


def test_ingest_examples():
    state = _state([(0, 0), (0, 0), (0, 0)], 0)
    same = ingest_batch(state, BatchPlan({}, False, state.surviving), {})
    assert same.stats == state.stats and same.elapsed == 0 and same.round == state.round + 1
    plan = BatchPlan({1: 4}, False, state.surviving)
    after = ingest_batch(state, plan, {1: 3})
    assert after.stats[1] == ArmStats(4, 3) and after.stats[1].empirical_mean == 0.75
    assert after.elapsed == 4
    with pytest.raises(UsageError):
        ingest_batch(state, plan, {1: 5})
    with pytest.raises(UsageError):
        ingest_batch(state, plan, {2: 1})


def test_config_validation():
    with pytest.raises(UsageError):
        PolicyConfig(horizon=10, beta=0.5)
    with pytest.raises(UsageError):
        PolicyConfig(horizon=10, num_rounds=0)
    with pytest.raises(UsageError):
        PolicyConfig(horizon=10, alpha=0)
    assert PolicyConfig(horizon=50, theory_alpha=True).effective_alpha == math.log(100)
    with pytest.raises(UsageError):
        initial_state(5, PolicyConfig(horizon=4))


def _check_trace(trace, horizon):
    assert trace.violations() == []
    assert trace.total_pulls == horizon


@pytest.mark.parametrize("kind", ["btsd", "btsi"])
@pytest.mark.parametrize("name", ["DS1", "DS3", "DS4", "DS6"])
@pytest.mark.parametrize("beta", [100.0, math.inf])
def test_runs_respect_invariants(kind, name, beta):
    inst = builtin(name)
    for T in (37, 1000, 20000):
        for M in (1, 3, 20):
            cfg = PolicyConfig(horizon=T, beta=beta, num_rounds=M)
            trace = run_policy(inst, cfg, replication_stream(1, T + M), kind)
            _check_trace(trace, T)
            changes = trace.num_batches - trace.meta["init_batches"]
            if kind == "btsd":
                assert changes <= M
            else:
                assert trace.num_batches <= M + 1
            surv = trace.survivors
            assert all(set(b) <= set(a) for a, b in zip(surv, surv[1:]))


def test_no_prune_keeps_every_arm():
    trace = run_policy(builtin("DS5"), PolicyConfig(horizon=5000, beta=math.inf),
                       replication_stream(0, 0), "btsd")
    assert all(len(s) == 10 for s in trace.survivors)


def test_degenerate_instance_prunes_quickly():
    inst = BanditInstance((1.0, 0.0))
    trace = run_policy(inst, PolicyConfig(horizon=10**5, num_rounds=20),
                       replication_stream(0, 0), "btsd")
    assert trace.pulls_per_arm()[1] < 50
    assert trace.survivors[-1] == (0,)


def test_policy_is_reproducible():
    cfg = PolicyConfig(horizon=10**4)
    a, b = (run_policy(builtin("DS2"), cfg, replication_stream(3, 8), "btsi") for _ in range(2))
    assert np.array_equal(a.seg_arm, b.seg_arm)
    assert np.array_equal(a.seg_successes, b.seg_successes)
