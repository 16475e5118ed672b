import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agelab.exploration import (
    ExplorationSchedule,
    ParamNoiseState,
    age_probabilities,
    age_select,
    boltzmann_probabilities,
    boltzmann_select,
    divergence_threshold,
    eps_greedy_select,
    epsilon_at,
    param_noise_adapt,
    param_noise_perturb,
    zeta_adv,
)
from agelab.neural import QNetwork, forward
from agelab.rng import SplitMix64
from conftest import ScriptedRng, within_sigmas

q_vectors = st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=6)


def zeta_reference(q, eps):
    # direct evaluation, no stabilization
    m = max(q)
    e = [math.exp((m - v) / eps) for v in q]
    return [x / sum(e) for x in e]


def test_schedule_points():
    s = ExplorationSchedule()
    assert epsilon_at(s, 0) == 1.0
    assert epsilon_at(s, 5000) == pytest.approx(0.51)
    assert epsilon_at(s, 10_000) == pytest.approx(0.02)
    assert epsilon_at(s, 99_999) == 0.02
    with pytest.raises(ValueError):
        epsilon_at(s, -1)


def test_zeta_worked_example():
    np.testing.assert_allclose(zeta_adv([1.0, 0.0], 1.0), [0.26894, 0.73106], atol=1e-5)
    np.testing.assert_allclose(zeta_adv([3.0, 3.0, 3.0], 0.1), [1 / 3] * 3)
    np.testing.assert_allclose(zeta_adv([1.0, 0.0], 1e-3), [0.0, 1.0], atol=1e-300)


def test_zeta_rejects_bad_input():
    with pytest.raises(ValueError):
        zeta_adv([1.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        zeta_adv([1.0, 0.0], -0.5)
    with pytest.raises(ValueError):
        zeta_adv([np.nan, 0.0], 0.5)


@given(q_vectors, st.floats(0.01, 10))
def test_zeta_matches_direct_formula(q, eps):
    gaps = max(q) - min(q)
    if gaps / eps > 700:  # direct formula would overflow
        return
    np.testing.assert_allclose(zeta_adv(q, eps), zeta_reference(q, eps), rtol=1e-10, atol=1e-300)


def test_zeta_normalization_random_trials():
    rng = SplitMix64(8)
    for _ in range(10_000):
        n = 2 + rng.integers(5)
        q = rng.normal(0.0, 5.0, size=n)
        eps = rng.uniform(0.01, 2.0)
        assert abs(zeta_adv(q, eps).sum() - 1.0) <= 1e-12


@given(q_vectors, st.floats(0.01, 10))
def test_zeta_orientation(q, eps):
    q = np.array(q)
    if np.count_nonzero(q == q.min()) > 1:
        return
    z = zeta_adv(q, eps)
    # exact ties in zeta can only come from exp underflow of non-argmin entries
    assert z[np.argmin(q)] == z.max()


@given(q_vectors, st.floats(0.05, 10), st.floats(-1e3, 1e3))
def test_zeta_shift_invariance(q, eps, c):
    np.testing.assert_allclose(zeta_adv(np.array(q) + c, eps), zeta_adv(q, eps), atol=1e-9)


def test_zeta_low_temperature_concentrates_on_worst():
    q = [2.0, -1.0, 0.5]
    for eps in (1.0, 0.3, 0.1, 0.02):
        z = zeta_adv(q, eps)
        assert z[1] == z.max()
    assert zeta_adv(q, 0.02)[1] > 1 - 1e-12


def test_zeta_finite_for_huge_gaps():
    z = zeta_adv([1e6, 0.0, -1e6], 0.02)
    assert np.all(np.isfinite(z)) and z[2] == 1.0


def two_stage_oracle(q, eps):
    """Enumerate the two branches explicitly."""
    n = len(q)
    greedy = min(range(n), key=lambda a: (-q[a], a))
    z = zeta_reference(q, eps)
    return [eps * z[a] + (1 - eps) * (a == greedy) for a in range(n)]


@pytest.mark.parametrize("n_actions", [2, 3, 5])
def test_age_two_stage_probabilities_brute_force(n_actions):
    rng = SplitMix64(100 + n_actions)
    grid = 100
    mids = (np.arange(grid) + 0.5) / grid
    for _ in range(3):
        q = list(rng.normal(0.0, 1.0, size=n_actions))
        for eps in (1.0, 0.5, 0.1, 0.02):
            oracle = two_stage_oracle(q, eps)
            np.testing.assert_allclose(age_probabilities(q, eps), oracle, atol=1e-12)
            # run the selector over every cell of a grid of (branch, sample) uniforms
            counts = np.zeros(n_actions)
            for u1 in mids:
                if u1 > eps:
                    counts[age_select(q, eps, ScriptedRng([u1]))] += grid
                    continue
                for u2 in mids:
                    counts[age_select(q, eps, ScriptedRng([u1, u2]))] += 1
            # each boundary can misplace at most one grid cell per coordinate
            np.testing.assert_allclose(counts / grid**2, oracle, atol=(n_actions + 1) / grid)


def test_age_forced_greedy_branch():
    assert age_select([0.3, 2.0, -1.0], 0.1, ScriptedRng([0.5])) == 1


def test_age_greedy_frequency():
    rng = SplitMix64(31)
    q = [5.0, 0.0]
    n = 100_000
    hits = sum(age_select(q, 0.02, rng) == 0 for _ in range(n))
    p = 0.98 + 0.02 * zeta_adv(q, 0.02)[0]
    assert within_sigmas(hits, n, p)


def test_age_equal_q_follows_lowest_index_tie_break():
    # Lowest-index tie-breaking sends the greedy branch to action 0, so the
    # split is 1 - eps/2 against eps/2 rather than an even one.
    for eps in (0.02, 0.5, 1.0):
        np.testing.assert_allclose(age_probabilities([1.0, 1.0], eps), [1 - eps / 2, eps / 2])


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=5))
def test_age_glie_direction(q):
    greedy = int(np.argmax(q))
    probs = [age_probabilities(q, e)[greedy] for e in (1.0, 0.5, 0.1, 0.02, 1e-6)]
    assert all(b >= a - 1e-12 for a, b in zip(probs, probs[1:]))
    for e, p in zip((1.0, 0.5, 0.1, 0.02), probs):
        assert p == pytest.approx(1 - e * (1 - zeta_adv(q, e)[greedy]), abs=1e-12)


def test_eps_greedy_extremes():
    rng = SplitMix64(3)
    n = 100_000
    hits = sum(eps_greedy_select([1.0, 0.0], 1.0, rng) == 0 for _ in range(n))
    assert within_sigmas(hits, n, 0.5)
    assert all(eps_greedy_select([0.0, 2.0, 1.0], 0.0, rng) == 1 for _ in range(1000))
    hits = sum(eps_greedy_select([1.0, 0.0], 0.5, rng) == 0 for _ in range(n))
    assert within_sigmas(hits, n, 0.75)


def test_boltzmann():
    np.testing.assert_allclose(boltzmann_probabilities([1.0, 0.0], 1.0), [0.731, 0.269], atol=5e-4)
    np.testing.assert_allclose(boltzmann_probabilities([2.0, 2.0, 2.0], 0.3), [1 / 3] * 3)
    assert boltzmann_probabilities([1.0, 0.0], 1e-3)[0] == pytest.approx(1.0)
    rng = SplitMix64(4)
    n = 50_000
    hits = sum(boltzmann_select([1.0, 0.0], 1.0, rng) == 0 for _ in range(n))
    assert within_sigmas(hits, n, math.e / (1 + math.e))
    with pytest.raises(ValueError):
        boltzmann_probabilities([1.0], 0.0)


def test_param_noise_zero_sigma_is_identity():
    rng = SplitMix64(5)
    net = QNetwork.initialize((4, 16, 2), rng)
    noisy = param_noise_perturb(net, ParamNoiseState(sigma=0.0), rng)
    x = rng.normal(size=(20, 4))
    np.testing.assert_array_equal(forward(net, x), forward(noisy, x))


def test_param_noise_statistics():
    rng = SplitMix64(6)
    net = QNetwork.initialize((4, 64, 64, 2), rng)
    noisy = param_noise_perturb(net, ParamNoiseState(sigma=0.1), rng)
    diff = noisy.flat - net.flat
    assert diff.std() == pytest.approx(0.1, rel=0.03)
    assert abs(diff.mean()) < 4 * 0.1 / math.sqrt(diff.size)


def test_param_noise_adapt_rule():
    s = ParamNoiseState(sigma=0.5, threshold=0.1)
    param_noise_adapt(s, 0.01)
    param_noise_adapt(s, 0.01)
    assert s.sigma == pytest.approx(0.5 * 1.01**2)
    param_noise_adapt(s, 0.2)
    assert s.sigma == pytest.approx(0.5 * 1.01)


def test_divergence_threshold():
    assert divergence_threshold(0.02, 2) == pytest.approx(-math.log(0.99))
    assert divergence_threshold(0.0, 2) == 0.0
