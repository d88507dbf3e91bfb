import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdnn_audio import mlp
from hdnn_audio.errors import DimensionMismatch, LabelOutOfRange
from hdnn_audio.mlp import (Activation, Layer, MlpModel, NewbobSchedule,
                            TrainSchedule, backprop_step, cross_entropy,
                            forward, gradients, init_random, load_model,
                            model_from_bytes, model_to_bytes, predict_frames,
                            save_model, train)


def small_model(rng, dims=(4, 6, 3)):
    return init_random(list(dims), rng)


class TestForward:
    def test_posterior_rows_on_simplex(self, rng):
        model = small_model(rng)
        _, post = forward(model, rng.standard_normal((10, 4)))
        assert post.shape == (10, 3)
        assert np.all(post >= 0)
        np.testing.assert_allclose(post.sum(axis=1), 1.0, rtol=1e-12)

    def test_activations_include_input(self, rng):
        model = small_model(rng)
        batch = rng.standard_normal((5, 4))
        acts, post = forward(model, batch)
        assert len(acts) == 3
        np.testing.assert_allclose(acts[0], batch)
        np.testing.assert_allclose(acts[-1], post)

    def test_single_layer_closed_form(self):
        # identity-ish weights: softmax(Wx + b) computed by hand
        w = np.array([[1.0, 0.0], [0.0, 1.0]])
        model = MlpModel([Layer(weights=w, bias=np.zeros(2),
                                activation=Activation.SOFTMAX)])
        _, post = forward(model, np.array([[np.log(3.0), 0.0]]))
        np.testing.assert_allclose(post[0], [0.75, 0.25], rtol=1e-12)

    def test_dim_mismatch(self, rng):
        model = small_model(rng)
        with pytest.raises(DimensionMismatch):
            forward(model, rng.standard_normal((3, 5)))

    def test_extreme_logits_are_stable(self):
        w = np.array([[1000.0], [-1000.0]])
        model = MlpModel([Layer(weights=w, bias=np.zeros(2),
                                activation=Activation.SOFTMAX)])
        _, post = forward(model, np.array([[1.0]]))
        assert np.all(np.isfinite(post))
        np.testing.assert_allclose(post[0], [1.0, 0.0], atol=1e-12)


class TestModelValidation:
    def test_layers_must_chain(self, rng):
        layers = [Layer(rng.standard_normal((5, 4)), np.zeros(5), Activation.SIGMOID),
                  Layer(rng.standard_normal((3, 6)), np.zeros(3), Activation.SOFTMAX)]
        with pytest.raises(DimensionMismatch):
            MlpModel(layers)

    def test_final_layer_must_be_softmax(self, rng):
        layers = [Layer(rng.standard_normal((3, 4)), np.zeros(3), Activation.SIGMOID)]
        with pytest.raises(DimensionMismatch):
            MlpModel(layers)

    def test_softmax_only_final(self, rng):
        layers = [Layer(rng.standard_normal((5, 4)), np.zeros(5), Activation.SOFTMAX),
                  Layer(rng.standard_normal((3, 5)), np.zeros(3), Activation.SOFTMAX)]
        with pytest.raises(DimensionMismatch):
            MlpModel(layers)


class TestCrossEntropy:
    def test_closed_form(self):
        post = np.array([[0.5, 0.25, 0.25], [0.1, 0.8, 0.1]])
        labels = np.array([0, 1])
        expected = -(np.log(0.5) + np.log(0.8)) / 2.0
        assert cross_entropy(post, labels) == pytest.approx(expected, rel=1e-12)

    def test_clamped_at_floor(self):
        post = np.array([[1.0, 0.0]])
        assert cross_entropy(post, np.array([1])) == pytest.approx(-np.log(1e-12))

    def test_label_out_of_range(self):
        post = np.array([[0.5, 0.5]])
        with pytest.raises(LabelOutOfRange):
            cross_entropy(post, np.array([2]))
        with pytest.raises(LabelOutOfRange):
            cross_entropy(post, np.array([-1]))


class TestGradients:
    def finite_difference(self, model, batch, labels, h=1e-5):
        fd = []
        for layer in model.layers:
            gw = np.zeros_like(layer.weights)
            for idx in np.ndindex(layer.weights.shape):
                orig = layer.weights[idx]
                layer.weights[idx] = orig + h
                up = cross_entropy(forward(model, batch)[1], labels)
                layer.weights[idx] = orig - h
                dn = cross_entropy(forward(model, batch)[1], labels)
                layer.weights[idx] = orig
                gw[idx] = (up - dn) / (2 * h)
            gb = np.zeros_like(layer.bias)
            for i in range(len(layer.bias)):
                orig = layer.bias[i]
                layer.bias[i] = orig + h
                up = cross_entropy(forward(model, batch)[1], labels)
                layer.bias[i] = orig - h
                dn = cross_entropy(forward(model, batch)[1], labels)
                layer.bias[i] = orig
                gb[i] = (up - dn) / (2 * h)
            fd.append((gw, gb))
        return fd

    def test_matches_finite_differences(self, rng):
        model = init_random([3, 5, 4, 2], rng)
        batch = rng.standard_normal((6, 3))
        labels = rng.integers(0, 2, size=6)
        analytic = gradients(model, batch, labels)
        numeric = self.finite_difference(model, batch, labels)
        for (aw, ab), (nw, nb) in zip(analytic, numeric):
            np.testing.assert_allclose(aw, nw, rtol=1e-4, atol=1e-7)
            np.testing.assert_allclose(ab, nb, rtol=1e-4, atol=1e-7)

    def test_backprop_step_applies_gradients(self, rng):
        model = small_model(rng)
        batch = rng.standard_normal((8, 4))
        labels = rng.integers(0, 3, size=8)
        grads = gradients(model, batch, labels)
        before = [(l.weights.copy(), l.bias.copy()) for l in model.layers]
        loss = backprop_step(model, batch, labels, lr=0.1)
        assert loss == pytest.approx(
            cross_entropy(forward_from(before, batch), labels))
        for layer, (w0, b0), (gw, gb) in zip(model.layers, before, grads):
            np.testing.assert_allclose(layer.weights, w0 - 0.1 * gw, rtol=1e-12)
            np.testing.assert_allclose(layer.bias, b0 - 0.1 * gb, rtol=1e-12)

    def test_descends_on_average(self, rng):
        model = small_model(rng)
        batch = rng.standard_normal((64, 4))
        labels = rng.integers(0, 3, size=64)
        first = backprop_step(model, batch, labels, lr=0.5)
        for _ in range(50):
            last = backprop_step(model, batch, labels, lr=0.5)
        assert last < first


def forward_from(saved, batch):
    """Posteriors of a snapshot (weights, bias) list with the standard
    sigmoid-hidden/softmax-output structure (oracle re-implementation)."""
    a = batch
    for i, (w, b) in enumerate(saved):
        z = a @ w.T + b
        if i == len(saved) - 1:
            ez = np.exp(z - z.max(axis=1, keepdims=True))
            a = ez / ez.sum(axis=1, keepdims=True)
        else:
            a = 1.0 / (1.0 + np.exp(-z))
    return a


class TestNewbob:
    def make(self, baseline=0.0):
        sched = TrainSchedule()
        return NewbobSchedule(sched, baseline)

    def test_scripted_trace(self):
        nb = self.make()
        trace = [10.0, 20.0, 30.0, 30.4, 30.45]
        lrs, stops = [], []
        for acc in trace:
            lrs.append(nb.lr)  # rate used for the epoch that produced acc
            stops.append(nb.update(acc))
        assert lrs == [0.002, 0.002, 0.002, 0.002, 0.001]
        assert stops == [False, False, False, False, True]

    def test_ramp_holds_rate(self):
        nb = self.make()
        for acc in (10.0, 20.0, 30.0):
            assert not nb.update(acc)
            assert nb.lr == 0.002

    def test_halving_continues(self):
        nb = self.make()
        nb.update(10.0)
        nb.update(10.3)  # ends ramp, continues (gain in (0.1, 0.5])
        assert nb.lr == 0.001
        nb.update(10.6)
        assert nb.lr == 0.0005

    def test_regression_stops(self):
        nb = self.make()
        nb.update(50.0)
        assert nb.update(49.0)

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            TrainSchedule(ramp_improvement_threshold=0.1,
                          stop_improvement_threshold=0.5)
        with pytest.raises(ValueError):
            TrainSchedule(cv_fraction=1.5)
        with pytest.raises(ValueError):
            TrainSchedule(min_epochs=-1)


class TestTrain:
    def linearly_separable(self, rng, n=600):
        x = rng.standard_normal((n, 2))
        y = (x[:, 0] + x[:, 1] > 0).astype(np.int64)
        return x, y

    def schedule(self, **kw):
        base = dict(initial_lr=0.5, minibatch_frames=32, max_epochs=20, rng_seed=0)
        base.update(kw)
        return TrainSchedule(**base)

    def test_learns_separable_problem(self, rng):
        x, y = self.linearly_separable(rng)
        init = init_random([2, 8, 2], np.random.default_rng(0))
        model, history = train(init, (x, y), self.schedule())
        acc = np.mean(predict_frames(model, x) == y)
        assert acc > 0.9
        assert history[0].lr == 0.5

    def test_zero_epochs_returns_init_copy(self, rng):
        x, y = self.linearly_separable(rng, n=50)
        init = init_random([2, 4, 2], np.random.default_rng(0))
        model, history = train(init, (x, y), self.schedule(max_epochs=0))
        assert history == []
        np.testing.assert_allclose(model.layers[0].weights,
                                   init.layers[0].weights)
        assert model is not init

    def test_deterministic(self, rng):
        x, y = self.linearly_separable(rng)
        init = init_random([2, 8, 2], np.random.default_rng(0))
        m1, h1 = train(init, (x, y), self.schedule())
        m2, h2 = train(init, (x, y), self.schedule())
        assert model_to_bytes(m1) == model_to_bytes(m2)
        assert [r.cv_accuracy for r in h1] == [r.cv_accuracy for r in h2]

    def test_min_epochs_defers_stopping(self, rng):
        x, y = self.linearly_separable(rng)
        init = init_random([2, 8, 2], np.random.default_rng(0))
        _, h_plain = train(init, (x, y), self.schedule())
        _, h_warm = train(init, (x, y), self.schedule(min_epochs=6))
        assert len(h_warm) >= 6
        # warmup holds the initial rate throughout
        assert all(r.lr == 0.5 for r in h_warm[:6])
        assert len(h_warm) >= len(h_plain)


class TestPredict:
    def test_matches_argmax(self, rng):
        model = small_model(rng)
        batch = rng.standard_normal((30, 4))
        _, post = forward(model, batch)
        np.testing.assert_array_equal(predict_frames(model, batch),
                                      post.argmax(axis=1))

    def test_tie_breaks_low_index(self):
        w = np.zeros((3, 2))
        model = MlpModel([Layer(weights=w, bias=np.zeros(3),
                                activation=Activation.SOFTMAX)])
        assert predict_frames(model, np.array([[1.0, 2.0]]))[0] == 0


class TestModelFiles:
    def test_bytes_round_trip(self, rng):
        model = init_random([3, 5, 2], rng)
        blob = model_to_bytes(model)
        loaded, offset = model_from_bytes(blob)
        assert offset == len(blob)
        for a, b in zip(model.layers, loaded.layers):
            np.testing.assert_array_equal(a.weights, b.weights)
            np.testing.assert_array_equal(a.bias, b.bias)
            assert a.activation is b.activation

    def test_file_round_trip(self, tmp_path, rng):
        model = init_random([4, 3], rng)
        save_model(model, tmp_path / "m.acnn")
        loaded = load_model(tmp_path / "m.acnn")
        np.testing.assert_array_equal(loaded.layers[0].weights,
                                      model.layers[0].weights)

    def test_bad_magic(self):
        with pytest.raises(DimensionMismatch):
            model_from_bytes(b"XXXX" + b"\x00" * 16)


class TestInit:
    @given(dims=st.lists(st.integers(1, 12), min_size=2, max_size=4))
    @settings(max_examples=20, deadline=None)
    def test_glorot_range_and_structure(self, dims):
        model = init_random(dims, np.random.default_rng(0))
        assert len(model.layers) == len(dims) - 1
        for i, layer in enumerate(model.layers):
            r = np.sqrt(6.0 / (layer.in_dim + layer.out_dim))
            assert np.all(np.abs(layer.weights) <= r)
            np.testing.assert_array_equal(layer.bias, 0.0)
            expected = (Activation.SOFTMAX if i == len(model.layers) - 1
                        else Activation.SIGMOID)
            assert layer.activation is expected
