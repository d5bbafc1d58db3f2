import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seaqugan import neural_core as nc
from seaqugan.neural_core import Activation, AdamState, MlpModel


def fd_grad(model, x, upstream, h=1e-5):
    grads = np.empty(model.n_params)
    for j in range(model.n_params):
        e = np.zeros(model.n_params)
        e[j] = h
        plus, _ = nc.forward(model.with_params(model.params + e), x)
        minus, _ = nc.forward(model.with_params(model.params - e), x)
        grads[j] = np.sum(upstream * (plus - minus)) / (2 * h)
    return grads


def fd_input_grad(model, x, upstream, h=1e-5):
    grads = np.empty_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        grads[idx] = np.sum(upstream * (nc.forward(model, x + e)[0] - nc.forward(model, x - e)[0])) / (2 * h)
    return grads


def assert_close_rel(actual, expected, rel=1e-4, floor=1e-6):
    assert np.all(np.abs(actual - expected) <= rel * np.abs(expected) + floor), np.max(np.abs(actual - expected))


class TestBuilders:
    def test_discriminator(self, rng):
        d = nc.build_discriminator(rng)
        assert d.n_params == 129
        assert d.weights(0).shape == (16, 6) and d.biases(0).shape == (16,)
        assert d.weights(1).shape == (1, 16) and d.biases(1).shape == (1,)
        assert 16 * 6 + 16 + 16 + 1 == 129
        out, _ = nc.forward(d, rng.normal(size=(100, 6)) * 50)
        assert np.all((out > 0) & (out < 1))

    def test_classical_generator(self, rng):
        g = nc.build_classical_generator(rng)
        assert g.n_params == 136
        # 10 n + 10 + 60 + 6 = 136 forces a 6-dim noise input
        assert [n for n in range(1, 20) if 10 * n + 76 == 136] == [6]
        assert g.layer_sizes == (6, 10, 6)
        out, _ = nc.forward(g, rng.normal(size=(200, 6)) * 10)
        assert np.all(out >= 0)

    def test_init_layout(self, rng):
        params = nc.init_params((6, 10, 6), rng, output_bias=2.0)
        g = MlpModel((6, 10, 6), params)
        assert np.all(g.biases(0) == 0)
        assert np.all(g.biases(1) == 2.0)
        assert np.all(np.abs(g.weights(0)) <= np.sqrt(1 / 6))
        assert np.all(np.abs(g.weights(1)) <= np.sqrt(1 / 10))

    def test_param_vector_checked(self):
        with pytest.raises(ValueError):
            MlpModel((2, 3), np.zeros(8))


class TestForward:
    def test_zero_model_sigmoid(self):
        out, _ = nc.forward(nc.build_discriminator(), np.ones(6))
        assert out == pytest.approx([0.5])

    def test_relu_output(self):
        model = MlpModel((1, 1), [1.0, 0.0], output_activation=Activation.RELU)
        out, _ = nc.forward(model, [-3.0])
        assert out[0] == 0

    def test_leaky_slope(self):
        model = MlpModel((1, 1), [1.0, 0.0], output_activation=Activation.LEAKY_RELU)
        out, _ = nc.forward(model, [-1.0])
        assert out[0] == pytest.approx(-nc.LEAKY_SLOPE)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            nc.forward(nc.build_discriminator(), np.ones(5))

    def test_pure(self, rng):
        d = nc.build_discriminator(rng)
        x = rng.normal(size=(4, 6))
        before = d.params.copy()
        a, _ = nc.forward(d, x)
        b, _ = nc.forward(d, x)
        assert a.tobytes() == b.tobytes()
        np.testing.assert_array_equal(d.params, before)


class TestBce:
    def test_values(self):
        assert nc.bce_loss(0.5, 1)[0] == pytest.approx(np.log(2))
        assert nc.bce_loss(0.5, 0)[0] == pytest.approx(np.log(2))
        for y in (0, 1):
            assert nc.bce_loss(float(y), y)[0] <= -np.log(1 - nc.BCE_CLAMP) + 1e-15

    def test_derivative(self):
        for d in (0.1, 0.5, 0.93):
            for y in (0, 1):
                h = 1e-6
                fd = (nc.bce_loss(d + h, y)[0] - nc.bce_loss(d - h, y)[0]) / (2 * h)
                assert nc.bce_loss(d, y)[1] == pytest.approx(fd, rel=1e-6)
                assert nc.bce_loss(d, y)[1] == pytest.approx((d - y) / (d * (1 - d)))

    @given(st.floats(0, 1), st.sampled_from([0, 1]))
    def test_nonnegative(self, d, y):
        loss, _ = nc.bce_loss(d, y)
        assert loss >= 0 and np.isfinite(loss)


class TestBackward:
    def test_zero_upstream(self, rng):
        d = nc.build_discriminator(rng)
        _, cache = nc.forward(d, rng.normal(size=(3, 6)))
        tape = nc.backward(d, cache, np.zeros((3, 1)))
        assert not np.any(tape.flat()) and not np.any(tape.input_grad)

    def test_linear_closed_form(self, rng):
        model = MlpModel((3, 2), rng.normal(size=8))
        x = rng.normal(size=3)
        up = rng.normal(size=2)
        _, cache = nc.forward(model, x)
        tape = nc.backward(model, cache, up)
        np.testing.assert_allclose(tape.weight_grads[0], np.outer(up, x))
        np.testing.assert_allclose(tape.bias_grads[0], up)
        np.testing.assert_allclose(tape.input_grad, model.weights(0).T @ up)

    def test_shape_mismatch(self, rng):
        d = nc.build_discriminator(rng)
        _, cache = nc.forward(d, np.ones(6))
        with pytest.raises(ValueError):
            nc.backward(d, cache, np.ones(2))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(["disc", "gen"]))
    def test_matches_finite_differences(self, seed, which):
        r = np.random.default_rng(seed)
        model = nc.build_discriminator(r) if which == "disc" else nc.build_classical_generator(r, output_bias=0.5)
        model = model.with_params(model.params + 0.1 * r.normal(size=model.n_params))
        x = r.normal(size=(3, 6))
        out, cache = nc.forward(model, x)
        up = r.normal(size=out.shape)
        tape = nc.backward(model, cache, up)
        assert_close_rel(tape.flat(), fd_grad(model, x, up))
        assert_close_rel(tape.input_grad, fd_input_grad(model, x, up))


class TestAdam:
    def test_zero_gradient(self):
        state = AdamState.zeros(4, lr=0.1)
        params = np.arange(4.0)
        new, state = nc.adam_step(state, params, np.zeros(4))
        np.testing.assert_array_equal(new, params)
        assert state.t == 1

    @given(st.floats(1e-3, 1e3), st.sampled_from([-1.0, 1.0]), st.floats(1e-4, 0.5))
    def test_first_step_magnitude(self, mag, sign, lr):
        state = AdamState.zeros(3, lr=lr)
        new, _ = nc.adam_step(state, np.zeros(3), np.full(3, sign * mag))
        step = np.abs(new)
        assert np.all(step <= lr) and np.all(step >= 0.99 * lr)
        assert np.all(np.sign(new) == -sign)

    def test_deterministic(self, rng):
        g = rng.normal(size=5)
        a = nc.adam_step(AdamState.zeros(5, lr=0.3), np.ones(5), g)
        b = nc.adam_step(AdamState.zeros(5, lr=0.3), np.ones(5), g)
        assert a[0].tobytes() == b[0].tobytes()

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            nc.adam_step(AdamState.zeros(3, lr=0.1), np.zeros(3), np.zeros(4))

    def test_matches_reference_update(self, rng):
        # hand-rolled two-step reference
        g1, g2 = rng.normal(size=3), rng.normal(size=3)
        params, state = nc.adam_step(AdamState.zeros(3, lr=0.01), np.zeros(3), g1)
        params, state = nc.adam_step(state, params, g2)
        m = 0.1 * 0.9 * g1 + 0.1 * g2
        v = 0.001 * 0.999 * g1**2 + 0.001 * g2**2
        first = -0.01 * g1 / (np.abs(g1) + 1e-8)
        expected = first - 0.01 * (m / (1 - 0.81)) / (np.sqrt(v / (1 - 0.999**2)) + 1e-8)
        np.testing.assert_allclose(params, expected, rtol=1e-9, atol=1e-12)
        assert state.t == 2 and np.all(state.v >= 0)


def test_checkpoint_roundtrip(tmp_path, rng):
    d = nc.build_discriminator(rng)
    path = tmp_path / "d.ckpt"
    nc.save_checkpoint(d, path)
    raw = path.read_bytes()
    assert raw[:4] == b"MLP1"
    assert len(raw) == 4 + 4 + 3 * 4 + 129 * 8
    back = nc.load_checkpoint(path, Activation.LEAKY_RELU, Activation.SIGMOID)
    assert back.layer_sizes == (6, 16, 1)
    assert back.params.tobytes() == d.params.tobytes()
