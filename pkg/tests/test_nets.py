from __future__ import annotations

import math

import numpy as np
import pytest

from qdpbt.nets import (
    AdamState,
    MlpSpec,
    adam_step,
    backward,
    backward_stacked,
    forward,
    forward_stacked,
    init_params,
)

# Hand-set 1-2-1 net used by the forward oracles below.
# Layout: W1 row-major then b1, then W2 then b2.
HAND_PARAMS = np.array([1.0, -1.0, 0.5, 0.25, 2.0, 3.0, -0.1], dtype=np.float32)


def fd_grad(f, x0: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite differences, the independent oracle for every gradient."""
    g = np.zeros_like(x0)
    for j in range(x0.size):
        xp = x0.copy()
        xp[j] += h
        xm = x0.copy()
        xm[j] -= h
        g[j] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def test_num_params_layout() -> None:
    assert MlpSpec((1, 2, 1)).num_params == 7
    assert MlpSpec((2, 4, 1)).num_params == 2 * 4 + 4 + 4 * 1 + 1
    assert MlpSpec((4, 64, 64, 2)).num_params == (4 + 1) * 64 + (64 + 1) * 64 + (64 + 1) * 2


def test_forward_hand_computed_relu_identity() -> None:
    # z1 = [0.4 + 0.5, -0.4 + 0.25] = [0.9, -0.15] -> relu -> [0.9, 0]
    # out = 0.9 * 2 + 0 * 3 - 0.1 = 1.7
    spec = MlpSpec((1, 2, 1), "relu", "identity")
    out = forward(spec, HAND_PARAMS, np.array([0.4], dtype=np.float32))
    assert out.shape == (1,)
    assert out[0] == pytest.approx(1.7, abs=1e-6)


def test_forward_hand_computed_tanh_variants() -> None:
    spec = MlpSpec((1, 2, 1), "tanh", "identity")
    out = forward(spec, HAND_PARAMS, np.array([0.4], dtype=np.float32))
    expected = 2.0 * math.tanh(0.9) + 3.0 * math.tanh(-0.15) - 0.1
    assert out[0] == pytest.approx(expected, abs=1e-6)

    spec2 = MlpSpec((1, 2, 1), "relu", "tanh")
    out2 = forward(spec2, HAND_PARAMS, np.array([0.4], dtype=np.float32))
    assert out2[0] == pytest.approx(math.tanh(1.7), abs=1e-6)


def test_forward_batch_matches_single_rows() -> None:
    rng = np.random.default_rng(3)
    spec = MlpSpec((3, 8, 2), "relu", "tanh")
    params = init_params(spec, rng)
    xb = rng.normal(size=(5, 3)).astype(np.float32)
    yb = forward(spec, params, xb)
    for i in range(5):
        assert np.array_equal(yb[i], forward(spec, params, xb[i]))


def test_stacked_rows_match_single_network_calls() -> None:
    # The population path must agree with the per-agent path; evaluation
    # exactness elsewhere leans on per-agent calls, this pins the stacked
    # kernel to them.
    rng = np.random.default_rng(7)
    spec = MlpSpec((4, 16, 3), "relu", "identity")
    pop = 6
    params = np.stack([init_params(spec, rng) for _ in range(pop)])
    x = rng.normal(size=(pop, 9, 4)).astype(np.float32)
    y = forward_stacked(spec, params, x)
    for p in range(pop):
        yp = forward(spec, params[p], x[p])
        np.testing.assert_allclose(y[p], yp, rtol=0, atol=0)


@pytest.mark.parametrize(
    "sizes,hidden,out",
    [
        ((2, 4, 1), "relu", "identity"),
        ((2, 4, 1), "tanh", "tanh"),
        ((3, 8, 2), "relu", "tanh"),
        ((4, 5, 5, 3), "tanh", "identity"),
    ],
)
def test_backward_matches_finite_differences(sizes, hidden, out) -> None:
    # 25 probes per shape, 100 total: step 1e-4 central differences in
    # float64 so the oracle itself is clean.
    rng = np.random.default_rng(hash((sizes, hidden, out)) % 2**32)
    spec = MlpSpec(sizes, hidden, out)
    for _ in range(25):
        params = init_params(spec, rng).astype(np.float64)
        x = rng.normal(size=(3, sizes[0]))
        upstream = rng.normal(size=(3, sizes[-1]))

        def loss_wrt_params(p):
            return float(np.sum(upstream * forward(spec, p, x)))

        grads, dx = backward(spec, params, x, upstream)
        fd = fd_grad(loss_wrt_params, params)
        np.testing.assert_allclose(grads, fd, rtol=1e-3, atol=1e-6)

        flat_x = x.ravel().copy()

        def loss_wrt_input(xf):
            return float(np.sum(upstream * forward(spec, params, xf.reshape(x.shape))))

        fd_x = fd_grad(loss_wrt_input, flat_x)
        np.testing.assert_allclose(dx.ravel(), fd_x, rtol=1e-3, atol=1e-6)


def test_backward_stacked_matches_per_row() -> None:
    rng = np.random.default_rng(11)
    spec = MlpSpec((3, 6, 2), "relu", "tanh")
    pop = 4
    params = np.stack([init_params(spec, rng) for _ in range(pop)])
    x = rng.normal(size=(pop, 5, 3)).astype(np.float32)
    up = rng.normal(size=(pop, 5, 2)).astype(np.float32)
    g, dx = backward_stacked(spec, params, x, up)
    for p in range(pop):
        gp, dxp = backward(spec, params[p], x[p], up[p])
        np.testing.assert_allclose(g[p], gp, rtol=0, atol=0)
        np.testing.assert_allclose(dx[p], dxp, rtol=0, atol=0)


def test_backward_does_not_mutate_inputs() -> None:
    rng = np.random.default_rng(5)
    spec = MlpSpec((2, 4, 1))
    params = init_params(spec, rng)
    before = params.copy()
    x = rng.normal(size=(4, 2)).astype(np.float32)
    backward(spec, params, x, np.ones((4, 1), dtype=np.float32))
    assert np.array_equal(params, before)


def test_param_length_mismatch_raises() -> None:
    spec = MlpSpec((2, 4, 1))
    with pytest.raises(ValueError):
        forward(spec, np.zeros(5, dtype=np.float32), np.zeros(2, dtype=np.float32))
    with pytest.raises(ValueError):
        backward(
            spec,
            np.zeros(spec.num_params + 1, dtype=np.float32),
            np.zeros(2, dtype=np.float32),
            np.zeros(1, dtype=np.float32),
        )


def test_bad_spec_rejected() -> None:
    with pytest.raises(ValueError):
        MlpSpec((3,))
    with pytest.raises(ValueError):
        MlpSpec((3, 0, 1))
    with pytest.raises(ValueError):
        MlpSpec((3, 2), hidden_activation="sigmoid")
    with pytest.raises(ValueError):
        MlpSpec((3, 2), output_activation="relu")


def test_init_params_bounds_dtype_determinism() -> None:
    spec = MlpSpec((4, 64, 2))
    p1 = init_params(spec, np.random.default_rng(42))
    p2 = init_params(spec, np.random.default_rng(42))
    assert p1.dtype == np.float32
    assert p1.shape == (spec.num_params,)
    assert np.array_equal(p1, p2)
    # per-layer bounds: first layer fan_in 4, second 64
    l0_end = (4 + 1) * 64
    assert np.all(np.abs(p1[:l0_end]) <= 1.0 / 2.0 + 1e-7)
    assert np.all(np.abs(p1[l0_end:]) <= 1.0 / 8.0 + 1e-7)
    assert np.max(np.abs(p1[:l0_end])) > 1.0 / 8.0  # actually uses the wider bound


def reference_adam(params, grads, m, v, step, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Straight transcription of the update rule, scalar loops, the oracle."""
    params = params.copy()
    m = m.copy()
    v = v.copy()
    step = step + 1
    for j in range(params.size):
        m[j] = b1 * m[j] + (1 - b1) * grads[j]
        v[j] = b2 * v[j] + (1 - b2) * grads[j] ** 2
        mh = m[j] / (1 - b1**step)
        vh = v[j] / (1 - b2**step)
        params[j] = params[j] - lr * mh / (math.sqrt(vh) + eps)
    return params, m, v, step


def test_adam_matches_reference_over_steps() -> None:
    rng = np.random.default_rng(9)
    n = 13
    params = rng.normal(size=(1, n)).astype(np.float32)
    state = AdamState.zeros(1, n)
    ref_p = params[0].astype(np.float64)
    ref_m = np.zeros(n)
    ref_v = np.zeros(n)
    ref_step = 0
    for _ in range(5):
        grads = rng.normal(size=(1, n)).astype(np.float32)
        state, params, skipped = adam_step(state, params, grads, lr=1e-2)
        assert not skipped.any()
        ref_p, ref_m, ref_v, ref_step = reference_adam(
            ref_p, grads[0].astype(np.float64), ref_m, ref_v, ref_step, 1e-2
        )
        np.testing.assert_allclose(params[0], ref_p, rtol=1e-5, atol=1e-6)
    assert state.step[0] == 5


def test_adam_first_step_is_signed_lr() -> None:
    # with zero moments the first bias-corrected update is -lr * sign(g)
    params = np.zeros((1, 4), dtype=np.float32)
    grads = np.array([[0.5, -2.0, 1e-3, 0.0]], dtype=np.float32)
    _, new, _ = adam_step(AdamState.zeros(1, 4), params, grads, lr=0.1)
    np.testing.assert_allclose(new[0, :3], [-0.1, 0.1, -0.1], rtol=1e-4)
    assert new[0, 3] == 0.0


def test_adam_skips_and_flags_nonfinite() -> None:
    params = np.ones((2, 3), dtype=np.float32)
    state = AdamState.zeros(2, 3)
    grads = np.array([[1.0, 1.0, 1.0], [1.0, np.nan, 1.0]], dtype=np.float32)
    state, new, skipped = adam_step(state, params, grads, lr=0.1)
    assert skipped.tolist() == [False, True]
    assert not np.array_equal(new[0], params[0])
    assert np.array_equal(new[1], params[1])
    assert np.array_equal(state.m[1], np.zeros(3, dtype=np.float32))
    assert state.step.tolist() == [1, 0]


def test_adam_mask_leaves_rows_untouched() -> None:
    params = np.ones((3, 2), dtype=np.float32)
    grads = np.full((3, 2), 0.5, dtype=np.float32)
    state = AdamState.zeros(3, 2)
    mask = np.array([True, False, True])
    state, new, skipped = adam_step(state, params, grads, lr=0.1, mask=mask)
    assert not skipped.any()
    assert np.array_equal(new[1], params[1])
    assert state.step.tolist() == [1, 0, 1]
    assert not np.array_equal(new[0], params[0])


def test_adam_pure_in_arguments() -> None:
    params = np.ones((1, 3), dtype=np.float32)
    grads = np.full((1, 3), 0.5, dtype=np.float32)
    state = AdamState.zeros(1, 3)
    adam_step(state, params, grads, lr=0.1)
    assert np.array_equal(params, np.ones((1, 3), dtype=np.float32))
    assert np.array_equal(state.m, np.zeros((1, 3), dtype=np.float32))
    assert state.step[0] == 0
