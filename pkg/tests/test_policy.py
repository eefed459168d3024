import numpy as np
import pytest

from superdraw import policy
from superdraw.errors import ConfigError, DataError
from superdraw.policy import (PARAM_FIELDS, MlpParams, PolicyInput,
                              PolicyNorm, backward, forward, he_init,
                              load_checkpoint, save_checkpoint)


def small_params(seed=0):
    return he_init(6, 5, 4, seed=seed)


def some_input(W=400_000.0):
    return PolicyInput(t=3.0, W=W, R=0.05, Q=1.1,
                       norm=PolicyNorm(horizon=41.0, wealth_scale=500_000.0))


def test_he_init_deterministic():
    a, b = he_init(seed=7), he_init(seed=7)
    assert a.allclose(b, rtol=0, atol=0)
    c = he_init(seed=8)
    assert not a.allclose(c)


def test_he_init_biases_zero_and_shapes():
    p = he_init(20, 20, 20, seed=0)
    assert p.widths == (20, 20, 20)
    for name in ("b0", "b1", "b2", "b3"):
        assert np.all(getattr(p, name) == 0.0)
    assert p.w0.shape == (20, 4)
    assert p.w3.shape == (1, 20)


def test_he_init_variance_scales_with_fan_in():
    p = he_init(30, 10_000, 5, seed=1)
    # w1 has fan-in 30 here; use the big layer's input weights instead.
    v = p.w2.var()  # shape (5, 10000), fan_in 10000
    assert v == pytest.approx(2.0 / 10_000, rel=0.1)


def test_he_init_rejects_bad_widths():
    with pytest.raises(ConfigError):
        he_init(0, 5, 5)


def test_forward_zero_params_gives_half():
    p = small_params().map(np.zeros_like)
    c, _ = forward(p, some_input(), w_plus_a=10_000.0)
    assert c == pytest.approx(5_000.0)


def test_forward_zero_resources_gives_zero():
    c, _ = forward(small_params(), some_input(), w_plus_a=0.0)
    assert c == 0.0


def test_forward_strictly_inside_budget():
    rng = np.random.default_rng(3)
    for seed in range(30):
        p = he_init(6, 5, 4, seed=seed)
        wpa = float(rng.uniform(1.0, 1e6))
        c, _ = forward(p, some_input(W=rng.uniform(0, 1e6)), w_plus_a=wpa)
        assert 0.0 < c < wpa


def test_forward_deterministic():
    p = small_params(2)
    a, _ = forward(p, some_input(), 123_456.0)
    b, _ = forward(p, some_input(), 123_456.0)
    assert a == b


def test_backward_simple_square():
    # The tape machinery on a scalar: f = c^2 has df/dc = 2c.
    p = small_params(4)
    c, tape = forward(p, some_input(), 200_000.0)
    sq = tape.output * tape.output
    sq.backward()
    g_sq = {n: tape.params[n].grad.copy() for n in PARAM_FIELDS}
    _, tape2 = forward(p, some_input(), 200_000.0)
    g_lin = backward(tape2, output_gradient=2.0 * c)
    for n in PARAM_FIELDS:
        assert np.allclose(g_sq[n], getattr(g_lin, n), rtol=1e-12)


def test_backward_zero_seed_zero_grads():
    p = small_params(5)
    _, tape = forward(p, some_input(), 50_000.0)
    g = backward(tape, output_gradient=0.0)
    for n in PARAM_FIELDS:
        assert np.all(getattr(g, n) == 0.0)


def relu_signature(p, inp, wpa):
    """Activation pattern of the three ReLU layers for one input."""
    x = np.array([[inp.t / inp.norm.horizon], [inp.W / inp.norm.wealth_scale],
                  [inp.R], [inp.Q]])
    sig = []
    h = x
    for wn, bn in (("w0", "b0"), ("w1", "b1"), ("w2", "b2")):
        z = getattr(p, wn) @ h + getattr(p, bn)
        sig.append(z > 0)
        h = np.maximum(z, 0.0)
    return np.concatenate([s.ravel() for s in sig])


def test_backward_matches_finite_differences():
    # 100 random parameter/input draws, one coordinate each; draws whose FD
    # step would cross a ReLU boundary are excluded via the activation
    # signature (the analytic subgradient is 0 on the dead side of a kink).
    rng = np.random.default_rng(11)
    norm = PolicyNorm(horizon=41.0, wealth_scale=500_000.0)
    checked = 0
    for trial in range(160):
        p = he_init(5, 4, 3, seed=100 + trial)
        inp = PolicyInput(t=float(rng.integers(0, 41)),
                          W=float(rng.uniform(1e3, 1e6)),
                          R=float(rng.normal(0, 0.15)),
                          Q=float(rng.uniform(0.8, 2.5)), norm=norm)
        wpa = float(rng.uniform(1e3, 1e6))
        _, tape = forward(p, inp, wpa)
        grads = backward(tape)
        name = PARAM_FIELDS[trial % len(PARAM_FIELDS)]
        arr = getattr(p, name)
        i = int(rng.integers(arr.shape[0]))
        j = int(rng.integers(arr.shape[1]))
        h = 1e-5
        p_up = policy.perturb(p, name, i, j, +h)
        p_dn = policy.perturb(p, name, i, j, -h)
        if not np.array_equal(relu_signature(p_up, inp, wpa),
                              relu_signature(p_dn, inp, wpa)):
            continue
        up, _ = forward(p_up, inp, wpa)
        dn, _ = forward(p_dn, inp, wpa)
        fd = (up - dn) / (2 * h)
        got = getattr(grads, name)[i, j]
        if abs(fd) < 1e-12 and abs(got) < 1e-12:
            continue  # dead path: both sides agree the gradient is 0
        assert got == pytest.approx(fd, rel=1e-5, abs=1e-9), (name, i, j)
        checked += 1
    assert checked >= 60


def test_params_shape_validation():
    p = small_params()
    with pytest.raises(ConfigError):
        MlpParams(w0=p.w0, b0=np.zeros((3, 1)), w1=p.w1, b1=p.b1,
                  w2=p.w2, b2=p.b2, w3=p.w3, b3=p.b3)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    p = he_init(20, 20, 20, seed=9)
    norm = PolicyNorm(horizon=41.0, wealth_scale=300_000.0)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, p, norm, config_hash="abc123", iteration=777)
    q, norm2, meta = load_checkpoint(path)
    for n in PARAM_FIELDS:
        assert np.array_equal(getattr(p, n), getattr(q, n))
    assert norm2 == norm
    assert meta == {"config_hash": "abc123", "iteration": 777}


def test_checkpoint_rejects_bad_file(tmp_path):
    path = tmp_path / "bad.npz"
    np.savez(path, version=np.array(1))
    with pytest.raises(DataError):
        load_checkpoint(path)


def test_norm_validation():
    with pytest.raises(ConfigError):
        PolicyNorm(horizon=0.0)
