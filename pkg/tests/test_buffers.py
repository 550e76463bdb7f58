import numpy as np
import pytest

from qdpbt.buffers import ReplayBuffer, StackedReplayBuffer


def fill_single(buf, n, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        s = rng.normal(size=3)
        a = rng.normal(size=2)
        ns = rng.normal(size=3)
        rows.append((s, a, float(i), ns, i % 5 == 4))
        buf.append(*rows[-1])
    return rows


def test_ring_overwrite_keeps_last_capacity():
    buf = ReplayBuffer(capacity=8, state_dim=3, action_dim=2)
    rows = fill_single(buf, 11)
    assert len(buf) == 8
    # entries 0..2 were overwritten by 8..10; slot layout is (8,9,10,3,4,...,7)
    stack = buf._stack
    got_rewards = stack.rewards[0].tolist()
    assert got_rewards == [8.0, 9.0, 10.0, 3.0, 4.0, 5.0, 6.0, 7.0]
    kept = {r for _, _, r, _, _ in rows[3:]}
    assert set(got_rewards) == kept


def test_single_sample_fields_are_consistent():
    buf = ReplayBuffer(capacity=32, state_dim=3, action_dim=2)
    rows = fill_single(buf, 20)
    batch = buf.sample(16, np.random.default_rng(1))
    assert batch["states"].shape == (16, 3)
    assert batch["actions"].shape == (16, 2)
    assert batch["rewards"].shape == (16,)
    by_reward = {float(r): (s, a, ns, d) for s, a, r, ns, d in rows}
    for j in range(16):
        s, a, ns, d = by_reward[float(batch["rewards"][j])]
        np.testing.assert_allclose(batch["states"][j], s.astype(np.float32))
        np.testing.assert_allclose(batch["actions"][j], a.astype(np.float32))
        np.testing.assert_allclose(batch["next_states"][j], ns.astype(np.float32))
        assert batch["dones"][j] == (1.0 if d else 0.0)


def test_sample_before_any_append_raises():
    buf = ReplayBuffer(capacity=4, state_dim=1, action_dim=1)
    with pytest.raises(ValueError, match="empty"):
        buf.sample(1, np.random.default_rng(0))


def test_sample_indices_only_reach_filled_region():
    buf = ReplayBuffer(capacity=100, state_dim=1, action_dim=1)
    for i in range(7):
        buf.append([float(i)], [0.0], float(i), [float(i + 1)], False)
    rng = np.random.default_rng(2)
    for _ in range(50):
        batch = buf.sample(64, rng)
        assert batch["rewards"].max() <= 6.0


def test_stacked_slots_are_independent_rows():
    stack = StackedReplayBuffer(pop=3, capacity=5, state_dim=2, action_dim=1)
    for t in range(4):
        states = np.array([[t, 0], [t, 1], [t, 2]], dtype=float)
        actions = np.array([[0.1], [0.2], [0.3]])
        rewards = np.array([t * 10.0, t * 10 + 1, t * 10 + 2])
        stack.append_batch(states, actions, rewards, states + 1, np.zeros(3))
    assert stack.size == 4
    np.testing.assert_allclose(stack.rewards[1, :4], [1.0, 11.0, 21.0, 31.0])
    np.testing.assert_allclose(stack.states[2, 3], [3.0, 2.0])


def test_stacked_sampling_uses_one_draw_per_slot_in_order():
    stack = StackedReplayBuffer(pop=2, capacity=10, state_dim=1, action_dim=1)
    for t in range(10):
        stack.append_batch([[t], [t]], [[0], [0]], [t, t], [[t]] * 2, [0, 0])
    rngs = [np.random.default_rng(5), np.random.default_rng(6)]
    twins = [np.random.default_rng(5), np.random.default_rng(6)]
    idx = stack.sample_indices(rngs, batch=7)
    assert idx.shape == (2, 7)
    np.testing.assert_array_equal(idx[0], twins[0].integers(0, 10, size=7))
    np.testing.assert_array_equal(idx[1], twins[1].integers(0, 10, size=7))


def test_gather_matches_indices():
    stack = StackedReplayBuffer(pop=2, capacity=6, state_dim=1, action_dim=1)
    for t in range(6):
        stack.append_batch([[t], [t + 100]], [[t]] * 2, [t, t + 100], [[t]] * 2, [0, 0])
    idx = np.array([[0, 5, 2], [1, 1, 4]])
    got = stack.gather(idx)
    np.testing.assert_allclose(got["rewards"], [[0, 5, 2], [101, 101, 104]])
    np.testing.assert_allclose(got["states"][:, :, 0], [[0, 5, 2], [101, 101, 104]])


def test_bad_sizes_rejected():
    with pytest.raises(ValueError):
        StackedReplayBuffer(pop=0, capacity=4, state_dim=1, action_dim=1)
    with pytest.raises(ValueError):
        ReplayBuffer(capacity=0, state_dim=1, action_dim=1)
