import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agelab.replay import Experience, ReplayBuffer, SumTree
from agelab.rng import SplitMix64


def exp(i, perturbed=False):
    s = np.full(4, float(i))
    return Experience(s, i % 2, 1.0, s + 1, False, perturbed)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 120))
def test_fifo_eviction(capacity, pushes):
    buf = ReplayBuffer(capacity)
    for i in range(pushes):
        buf.push(exp(i))
    assert len(buf) == min(pushes, capacity)
    kept = sorted(int(buf[j].state[0]) for j in range(len(buf)))
    assert kept == list(range(max(0, pushes - capacity), pushes))


def test_capacity_one_holds_latest():
    buf = ReplayBuffer(1)
    buf.push(exp(1))
    buf.push(exp(2))
    assert len(buf) == 1 and buf[0].state[0] == 2.0


def test_empty_sample_raises(rng):
    with pytest.raises(ValueError):
        ReplayBuffer(10).sample_uniform(4, rng)
    with pytest.raises(ValueError):
        ReplayBuffer(10, prioritized=True).sample_prioritized(4, rng)


def test_roundtrip_fields():
    buf = ReplayBuffer(5)
    e = Experience(np.array([1.0, 2, 3, 4]), 1, -0.5, np.array([5.0, 6, 7, 8]), True, True)
    buf.push(e)
    got = buf[0]
    np.testing.assert_array_equal(got.state, e.state)
    np.testing.assert_array_equal(got.next_state, e.next_state)
    assert (got.action, got.reward, got.terminal, got.perturbed) == (1, -0.5, True, True)


def test_uniform_sampling_chi_square(rng):
    n = 10
    buf = ReplayBuffer(n)
    for i in range(n):
        buf.push(exp(i))
    draws = buf.sample_uniform(100_000, rng).indices
    counts = np.bincount(draws, minlength=n)
    expected = draws.size / n
    chi2 = ((counts - expected) ** 2 / expected).sum()
    # 99.9th percentile of chi-square with 9 dof
    assert chi2 < 27.88


def test_prioritized_ratio(rng):
    buf = ReplayBuffer(2, prioritized=True, alpha=1.0)
    buf.push(exp(0))
    buf.push(exp(1))
    buf.update_priorities([0, 1], [2.0, 1.0])
    draws = buf.sample_prioritized(60_000, rng).indices
    ratio = np.count_nonzero(draws == 0) / np.count_nonzero(draws == 1)
    assert ratio == pytest.approx(2.0, rel=0.05)


def test_importance_weights(rng):
    buf = ReplayBuffer(4, prioritized=True, alpha=1.0)
    for i in range(4):
        buf.push(exp(i))
    buf.update_priorities([0, 1, 2, 3], [1.0, 1.0, 1.0, 5.0])
    batch = buf.sample_prioritized(2000, rng, beta=1.0)
    assert batch.weights.max() == 1.0
    p = buf.priorities()[batch.indices] / buf.priorities().sum()
    np.testing.assert_allclose(batch.weights, (1 / p) / (1 / p).max(), rtol=1e-9)


def test_new_entries_get_max_priority():
    buf = ReplayBuffer(4, prioritized=True, alpha=1.0)
    buf.push(exp(0))
    buf.update_priorities([0], [7.0])
    buf.push(exp(1))
    assert buf.priorities()[1] == pytest.approx(7.0 + 1e-6)


def test_stale_priority_update_skipped(rng):
    buf = ReplayBuffer(2, prioritized=True, alpha=1.0)
    buf.push(exp(0))
    buf.push(exp(1))
    batch = buf.sample_prioritized(1, rng)
    slot = int(batch.indices[0])
    buf.push(exp(2))
    buf.push(exp(3))  # both slots overwritten
    before = buf.priorities().copy()
    buf.update_priorities(batch.indices, [100.0], batch.stamps)
    np.testing.assert_array_equal(buf.priorities(), before)
    assert buf.stale_updates == 1
    assert 0 <= slot < 2


def test_composition():
    buf = ReplayBuffer(10)
    for i in range(8):
        buf.push(exp(i, perturbed=i < 2))
    assert buf.composition() == pytest.approx((0.75, 0.25))


def test_pre_attack_count_reaches_zero_after_exactly_capacity_pushes():
    cap = 50
    buf = ReplayBuffer(cap)
    for i in range(cap + 7):
        buf.push(exp(i))
    start = buf.push_count
    for k in range(1, cap + 1):
        buf.push(exp(0, perturbed=True))
        assert buf.count_pushed_before(start) == cap - k
    assert buf.composition() == (0.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.integers(2, 8), st.integers(0, 2**32))
def test_sum_tree_matches_prefix_search(capacity, branching, seed):
    rng = SplitMix64(seed)
    tree = SumTree(capacity, branching)
    values = rng.uniform(0.0, 3.0, size=capacity)
    values[rng.integers(capacity, size=capacity // 3)] = 0.0
    for i, v in enumerate(values):
        tree.update(i, v)
    assert tree.total == pytest.approx(values.sum(), rel=1e-12)
    if values.sum() == 0:
        return
    u = rng.random(200) * values.sum()
    expect = np.searchsorted(np.cumsum(values), u, side="right")
    got = tree.find(u)
    # floating-point ties at interval edges may land on a neighbour
    agree = got == np.minimum(expect, capacity - 1)
    assert agree.mean() > 0.95
    assert np.all(values[got] > 0)


def test_sum_tree_vector_update_matches_scalar():
    a, b = SumTree(100, 4), SumTree(100, 4)
    idx = np.array([3, 50, 99, 3])
    vals = np.array([1.0, 2.0, 3.0, 4.0])
    a.update(idx, vals)
    for i, v in zip(idx, vals):
        b.update(int(i), v)
    for la, lb in zip(a.levels, b.levels):
        np.testing.assert_array_equal(la, lb)
    assert a.total == 9.0
