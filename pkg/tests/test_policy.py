import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matslp.costmap import CostFieldCache, LocalView, observe
from matslp.grid import Action, GridMap
from matslp.mapgen import random_map
from matslp.policy import (
    LinearPolicy,
    SurrogatePolicy,
    WeightsFormatError,
    discounted_progress,
    history_value,
    identity_weights,
    load_policy,
    random_policy,
    read_weights,
    reward,
    save_weights,
)

from oracles import geometric_value, history_value as history_oracle


def _obs(grid, pos, goal, others=None, m=11):
    return observe(LocalView(grid, 0, pos, goal, others or {}, m))


def _random_observations(n_maps, per_map, seed=0):
    rng = np.random.default_rng(seed)
    for k in range(n_maps):
        g = random_map((int(rng.integers(3, 16)), int(rng.integers(3, 16))), float(rng.choice([0.0, 0.1, 0.2, 0.3])), k + 1000 * seed)
        cache = CostFieldCache(g)
        free = g.free_cells()
        for _ in range(per_map):
            pos = free[rng.integers(len(free))]
            goal = free[rng.integers(len(free))]
            others = {}
            for j in range(int(rng.integers(0, 4))):
                c = free[rng.integers(len(free))]
                if c != pos:
                    others[j + 1] = (c, goal)
            m = int(rng.choice([3, 5, 11]))
            yield g, observe(LocalView(g, 0, pos, goal, others, m), cache)


# -- evaluate ------------------------------------------------------------------

def test_one_step_left_of_goal_prefers_left():
    # ego at (4, 5), goal (5, 5): the goal lies to the RIGHT of the ego
    out = SurrogatePolicy().evaluate(_obs(GridMap.empty(10, 10), (4, 5), (5, 5)))
    assert out.best_action == Action.RIGHT
    # and mirrored: goal one step to the left
    out = SurrogatePolicy().evaluate(_obs(GridMap.empty(10, 10), (6, 5), (5, 5)))
    assert out.best_action == Action.LEFT
    assert out.priors[Action.LEFT] == out.priors.max()


def test_value_zero_on_goal():
    assert SurrogatePolicy().evaluate(_obs(GridMap.empty(5, 5), (2, 2), (2, 2))).value == 0.0


def test_value_closed_form():
    out = SurrogatePolicy(gamma=0.96).evaluate(_obs(GridMap.empty(5, 5), (0, 0), (1, 1)))
    assert out.value == pytest.approx(1.96, abs=1e-12)
    for d in range(0, 40):
        assert discounted_progress(d, 0.96) == pytest.approx(geometric_value(d, 0.96), abs=1e-9)
        assert discounted_progress(d, 0.9, 2.5) == pytest.approx(geometric_value(d, 0.9, 2.5), abs=1e-9)


def test_unreachable_goal_value_zero():
    g = GridMap.from_rows([".#."])
    assert SurrogatePolicy().evaluate(_obs(g, (0, 0), (2, 0), m=3)).value == 0.0


def test_history_value():
    assert history_value(4, 4, 0.96) == pytest.approx(geometric_value(4, 0.96), abs=1e-12)
    assert history_value(6, 4, 0.96) == pytest.approx(0.96 ** 2 * geometric_value(4, 0.96), abs=1e-12)
    assert history_value(-1, 3, 0.96) == 0.0 and history_value(0, 0, 0.96) == 0.0
    for d in range(12):
        for b in range(12):
            assert history_value(d, b, 0.9, 2.0) == pytest.approx(history_oracle(d, b, 0.9, 2.0), abs=1e-12)
    sur = SurrogatePolicy()
    assert sur.leaf_value(99.0, 5, 2) == history_value(5, 2, 0.96)
    assert random_policy().leaf_value(0.0, 5, 2) == 0.0


@pytest.mark.parametrize("best,after,expect", [(5, 4, 1.0), (5, 5, 0.0), (5, 6, 0.0), (3, 0, 1.0)])
def test_reward_examples(best, after, expect):
    assert reward(best, after) == expect


def test_reward_history_is_running_minimum():
    best = 5
    got = []
    for d in (6, 5):
        got.append(reward(best, d))
        best = min(best, d)
    assert got == [0.0, 0.0]
    assert reward(5, 4, r=0.5) == 0.5


def test_rejects_bad_hyperparameters():
    with pytest.raises(ValueError):
        SurrogatePolicy(tau=0)
    with pytest.raises(ValueError):
        SurrogatePolicy(gamma=1.0)


def test_tiny_window_rejected():
    with pytest.raises(ValueError):
        SurrogatePolicy().evaluate(_obs(GridMap.empty(3, 3), (1, 1), (0, 0), m=1))


# -- random policy -----------------------------------------------------------

def test_random_policy_open_cell():
    out = random_policy().evaluate(_obs(GridMap.empty(5, 5), (2, 2), (0, 0)))
    np.testing.assert_allclose(out.priors, 0.2)
    assert out.value == 0.0


def test_random_policy_corner():
    out = random_policy().evaluate(_obs(GridMap.empty(5, 5), (0, 0), (4, 4)))
    np.testing.assert_allclose(out.priors, [1 / 3, 0, 1 / 3, 0, 1 / 3])
    assert out.value == 0.0


# -- weights files -------------------------------------------------------------

def test_identity_weights_match_surrogate(tmp_path):
    p = tmp_path / "w.bin"
    save_weights(identity_weights(5), p)
    lin = load_policy(p)
    assert not lin.uses_agents
    sur = SurrogatePolicy()
    for _, obs in _random_observations(10, 20):
        if obs.size != 5:
            continue
        a, b = lin.evaluate(obs), sur.evaluate(obs)
        np.testing.assert_allclose(a.priors, b.priors, atol=1e-12)
        assert a.value == b.value


def test_zero_weights_uniform_over_valid(tmp_path):
    p = tmp_path / "w.bin"
    save_weights(np.zeros((5, 2, 3, 3)), p)
    out = load_policy(p).evaluate(_obs(GridMap.empty(5, 5), (0, 0), (4, 4), m=3))
    np.testing.assert_allclose(out.priors, [1 / 3, 0, 1 / 3, 0, 1 / 3])


def test_missing_weights_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_policy(tmp_path / "nope.bin")


def test_weights_header_layout(tmp_path):
    p = tmp_path / "w.bin"
    save_weights(identity_weights(3), p)
    lines = p.read_bytes().split(b"\n", 3)
    assert lines[0] == b"MATSLP-WEIGHTS 1"
    assert lines[1] == b"shape 5 2 3 3"
    assert lines[2].startswith(b"crc32 ")
    assert len(lines[3]) == 4 * 5 * 2 * 9
    np.testing.assert_array_equal(read_weights(p), identity_weights(3))


@pytest.mark.parametrize("mutate", ["magic", "crc", "size", "truncated", "header"])
def test_malformed_weights(tmp_path, mutate):
    p = tmp_path / "w.bin"
    save_weights(identity_weights(3), p)
    raw = p.read_bytes()
    if mutate == "magic":
        raw = raw.replace(b"MATSLP-WEIGHTS 1", b"NOTWEIGHTS 1", 1)
    elif mutate == "crc":
        raw = raw[:-1] + bytes([raw[-1] ^ 1])
    elif mutate == "size":
        raw = raw[:-4]
    elif mutate == "truncated":
        raw = raw.split(b"\n")[0]
    else:
        raw = raw.replace(b"shape", b"shap", 1)
    p.write_bytes(raw)
    with pytest.raises(WeightsFormatError):
        read_weights(p)


def test_linear_policy_shape_checks():
    with pytest.raises(WeightsFormatError):
        LinearPolicy(np.zeros((4, 2, 3, 3)))
    with pytest.raises(WeightsFormatError):
        LinearPolicy(np.zeros((5, 2, 3, 3))).evaluate(_obs(GridMap.empty(5, 5), (2, 2), (0, 0), m=5))


def test_agent_channel_weights_are_used():
    w = identity_weights(3).astype(float)
    w[Action.RIGHT, 0, 1, 2] = -100.0  # avoid a neighbour standing to the right
    pol = LinearPolicy(w)
    assert pol.uses_agents
    g = GridMap.empty(6, 1)
    busy = _obs(g, (2, 0), (5, 0), {1: ((3, 0), (0, 0))}, m=3)
    free = _obs(g, (2, 0), (5, 0), m=3)
    assert pol.evaluate(free).best_action == Action.RIGHT
    assert pol.evaluate(busy).best_action != Action.RIGHT


# -- properties ------------------------------------------------------------------

def test_simplex_and_masking_on_10k_observations():
    pol = SurrogatePolicy()
    rnd = random_policy()
    n = 0
    for g, obs in _random_observations(100, 100, seed=1):
        for out in (pol.evaluate(obs), rnd.evaluate(obs)):
            p = out.priors
            assert abs(p.sum() - 1.0) <= 1e-9 and (p >= 0).all()
            for a in range(1, 5):
                if g.step_cell(obs.ego_pos, a) is None:
                    assert p[a] <= 1e-6
            assert 0.0 <= out.value <= 1.0 / (1 - 0.96)
        n += 1
    assert n == 10_000


@pytest.mark.parametrize("tau", [0.02, 0.1, 0.2])
def test_greedy_consistency_on_empty_map(tau):
    g = GridMap.empty(15, 12)
    cache = CostFieldCache(g)
    pol = SurrogatePolicy(tau=tau)
    goal = (9, 4)
    for start in g.free_cells():
        d0 = cache(goal)[start]
        pos, steps = start, 0
        while pos != goal and steps <= d0:
            a = pol.evaluate(observe(LocalView(g, 0, pos, goal, {}, 11), cache)).best_action
            pos = g.step_cell(pos, a)
            steps += 1
        assert pos == goal and steps == d0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(0, 4), min_size=1, max_size=60))
def test_reward_soundness(seed, actions):
    g = random_map((8, 8), 0.2, seed % 200)
    free = g.free_cells()
    rng = np.random.default_rng(seed)
    pos = free[rng.integers(len(free))]
    goal = free[rng.integers(len(free))]
    cf = CostFieldCache(g)(goal)
    if not cf.reachable(pos):
        return
    best = d0 = cf[pos]
    total = 0.0
    for a in actions:
        pos = g.step_cell(pos, a) or pos
        gain = reward(best, cf[pos])
        assert gain in (0.0, 1.0)
        total += gain
        best = min(best, cf[pos])
    assert total <= d0


@settings(max_examples=200, deadline=None)
@given(st.integers(-1, 200), st.floats(0.01, 0.99), st.floats(0.1, 5))
def test_value_bound(d, gamma, r):
    v = discounted_progress(d, gamma, r)
    assert 0.0 <= v <= r / (1 - gamma) + 1e-9
    if d > 0:
        assert math.isclose(v, r * (1 - gamma ** d) / (1 - gamma))
