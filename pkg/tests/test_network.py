import numpy as np
import pytest

from utils.policy.network import (
    NetworkSpec,
    backward_sequence,
    flatten_params,
    forward_sequence,
    gaussian_entropy,
    gru_step,
    init_params,
    log_prob,
    log_prob_grads,
    policy_forward,
    policy_spec,
    unflatten_params,
    value_forward,
    value_spec,
    zeros_like_params,
)

TINY = NetworkSpec(obs_dim=2, widths=(3, 3, 3, 1), log_std=True)


def _relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def _numeric_grads(params, loss_fn, step=1e-5):
    grads = {}
    for name, value in params.items():
        if name == "log_std":
            continue
        g = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            original = value[idx]
            value[idx] = original + step
            plus = loss_fn(params)
            value[idx] = original - step
            minus = loss_fn(params)
            value[idx] = original
            g[idx] = (plus - minus) / (2.0 * step)
        grads[name] = g
    return grads


def test_default_widths():
    assert policy_spec().widths == (110, 57, 30, 3)
    assert value_spec().widths == (110, 23, 5, 1)
    assert policy_spec().log_std and not value_spec().log_std


def test_param_count_matches_shapes():
    for spec in (policy_spec(), value_spec(), TINY):
        params = init_params(spec, seed=0)
        assert flatten_params(params, spec).size == spec.n_params


def test_init_is_seeded():
    a = init_params(policy_spec(), seed=3)
    b = init_params(policy_spec(), seed=3)
    c = init_params(policy_spec(), seed=4)
    np.testing.assert_array_equal(flatten_params(a, policy_spec()), flatten_params(b, policy_spec()))
    assert not np.array_equal(a["W1"], c["W1"])
    assert np.all(a["b1"] == 0.0)
    np.testing.assert_array_equal(init_params(policy_spec(), seed=3, init_log_std=-0.5)["log_std"], [-0.5] * 3)


def test_flatten_round_trip():
    params = init_params(TINY, seed=1)
    back = unflatten_params(flatten_params(params, TINY), TINY)
    for name in params:
        np.testing.assert_array_equal(back[name], params[name])
    with pytest.raises(ValueError):
        unflatten_params(np.zeros(TINY.n_params + 1), TINY)


def test_gru_with_zero_params_halves_state():
    params = zeros_like_params(init_params(TINY, seed=0))
    h = np.array([0.4, -1.0, 2.0])
    h_new, (z, r, h_cand) = gru_step(params, np.zeros(3), h)
    np.testing.assert_array_equal(z, 0.5)
    np.testing.assert_array_equal(r, 0.5)
    np.testing.assert_array_equal(h_cand, 0.0)
    np.testing.assert_array_equal(h_new, 0.5 * h)
    np.testing.assert_array_equal(gru_step(params, np.zeros(3), np.zeros(3))[0], 0.0)


def test_zero_policy_outputs():
    spec = policy_spec()
    params = zeros_like_params(init_params(spec, seed=0))
    mean, std, h = policy_forward(params, spec, np.zeros(spec.obs_dim), np.zeros(spec.hidden_size))
    np.testing.assert_array_equal(mean, 0.0)
    np.testing.assert_array_equal(std, 1.0)
    v, _ = value_forward(zeros_like_params(init_params(value_spec(), seed=0)), value_spec(), np.zeros(11))
    assert v == 0.0


def test_forward_is_pure():
    spec = policy_spec()
    params = init_params(spec, seed=2)
    obs = np.linspace(-1.0, 1.0, spec.obs_dim)
    h = np.full(spec.hidden_size, 0.1)
    first = policy_forward(params, spec, obs, h)
    second = policy_forward(params, spec, obs, h)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)


def test_shape_mismatch_raises():
    spec = policy_spec()
    params = init_params(spec, seed=0)
    with pytest.raises(ValueError):
        policy_forward(params, spec, np.zeros(5))
    with pytest.raises(ValueError):
        policy_forward(params, spec, np.zeros(spec.obs_dim), np.zeros(4))


def test_single_step_matches_sequence():
    spec = policy_spec()
    params = init_params(spec, seed=5)
    obs = np.random.default_rng(0).normal(size=(6, 1, spec.obs_dim))
    out, _, _ = forward_sequence(params, spec, obs)
    h = None
    for t in range(6):
        mean, _, h = policy_forward(params, spec, obs[t, 0], h)
        np.testing.assert_allclose(mean, out[t, 0], rtol=0, atol=1e-14)


def test_reset_mask_restarts_the_hidden_state():
    params = init_params(TINY, seed=6)
    obs = np.random.default_rng(1).normal(size=(7, 1, 2))
    resets = np.zeros((7, 1))
    resets[3, 0] = 1.0
    joined, _, _ = forward_sequence(params, TINY, obs, resets=resets)
    fresh, _, _ = forward_sequence(params, TINY, obs[3:])
    np.testing.assert_array_equal(joined[3:], fresh)


def test_log_prob():
    assert log_prob(np.zeros(3), np.ones(3), np.zeros(3)) == pytest.approx(-1.5 * np.log(2.0 * np.pi))
    assert log_prob(np.zeros(3), np.ones(3), np.zeros(3)) == pytest.approx(-2.7568, abs=1e-4)
    batch = log_prob(np.zeros((4, 2, 3)), np.ones(3), np.zeros((4, 2, 3)))
    assert batch.shape == (4, 2)


def test_log_prob_grads_match_finite_differences():
    rng = np.random.default_rng(2)
    mean, log_std, u = rng.normal(size=3), rng.normal(scale=0.3, size=3), rng.normal(size=3)
    d_mean, d_log_std = log_prob_grads(mean, log_std, u)
    step = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        fd_mean = (log_prob(mean + e, np.exp(log_std), u) - log_prob(mean - e, np.exp(log_std), u)) / (2 * step)
        fd_std = (log_prob(mean, np.exp(log_std + e), u) - log_prob(mean, np.exp(log_std - e), u)) / (2 * step)
        assert d_mean[i] == pytest.approx(fd_mean, rel=1e-6)
        assert d_log_std[i] == pytest.approx(fd_std, rel=1e-6, abs=1e-9)


def test_entropy_of_unit_gaussian():
    assert gaussian_entropy(np.zeros(3)) == pytest.approx(1.5 * (1.0 + np.log(2.0 * np.pi)))


def test_constant_loss_has_zero_gradient():
    params = init_params(TINY, seed=0)
    _, _, cache = forward_sequence(params, TINY, np.ones((5, 2, 2)))
    grads = backward_sequence(params, cache, np.zeros((5, 2, 1)))
    assert all(np.all(g == 0.0) for g in grads.values())


@pytest.mark.parametrize("draw", range(10))
def test_bptt_matches_finite_differences(draw):
    rng = np.random.default_rng(100 + draw)
    params = init_params(TINY, seed=draw)
    for name in params:
        if name.startswith("b"):
            params[name] = rng.normal(scale=0.5, size=params[name].shape)
    obs = rng.normal(size=(5, 2, 2))
    resets = np.zeros((5, 2))
    resets[2, 1] = 1.0
    weights = rng.normal(size=(5, 2, 1))
    h0 = rng.normal(scale=0.5, size=(2, 3))

    def loss(p):
        out, _, _ = forward_sequence(p, TINY, obs, h0=h0, resets=resets)
        return float(np.sum(weights * out))

    _, _, cache = forward_sequence(params, TINY, obs, h0=h0, resets=resets)
    analytic = backward_sequence(params, cache, weights)
    numeric = _numeric_grads(params, loss)
    for name in numeric:
        assert _relative_error(analytic[name], numeric[name]) < 1e-5, name
