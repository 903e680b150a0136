import numpy as np
import pytest

from spectralprune import nn
from spectralprune.data import SplitView
from spectralprune.errors import ConfigError, DimensionError


def naive_forward(network, batch):
    # independent oracle: triple-loop matrix multiply, no vectorization
    outputs = []
    for row in batch:
        a = list(row)
        for layer in network.layers:
            z = []
            for i in range(layer.out_units):
                acc = layer.bias[i]
                for j in range(layer.in_units):
                    acc += layer.weight[i, j] * a[j]
                z.append(acc)
            if layer.activation == "relu":
                a = [max(v, 0.0) for v in z]
            elif layer.activation == "sigmoid":
                a = [1.0 / (1.0 + np.exp(-v)) for v in z]
            elif layer.activation == "tanh":
                a = [np.tanh(v) for v in z]
            else:
                a = z
        outputs.append(a)
    return np.array(outputs)


class TestForward:
    def test_identity_single_layer(self):
        net = nn.Network(
            [
                nn.DenseLayer(np.eye(2), np.zeros(2), "identity"),
                nn.DenseLayer(np.eye(2), np.zeros(2), "identity"),
            ]
        )
        out, _ = nn.forward(net, np.array([[1.0, 2.0]]))
        np.testing.assert_array_equal(out, [[1.0, 2.0]])

    def test_relu_clamps_negative_preactivation(self):
        layer = nn.DenseLayer(np.array([[1.0, -1.0], [0.0, 0.0]]), np.zeros(2), "relu")
        net = nn.Network([layer, nn.DenseLayer(np.eye(2), np.zeros(2), "identity")])
        _, trace = nn.forward(net, np.array([[2.0, 5.0]]), want_trace=True)
        assert trace.pre[0][0, 0] == -3.0
        assert trace.post[0][0, 0] == 0.0

    def test_matches_naive_oracle(self):
        net = nn.init_network([3, 5, 4, 2], seed=7)
        batch = np.random.default_rng(7).normal(size=(6, 3))
        out, _ = nn.forward(net, batch)
        np.testing.assert_allclose(out, naive_forward(net, batch), atol=1e-10)

    def test_dimension_mismatch_names_layer(self):
        net = nn.init_network([3, 5, 2], seed=0)
        with pytest.raises(DimensionError) as err:
            nn.forward(net, np.zeros((1, 4)))
        assert err.value.layer_index == 0

    def test_trace_consistency(self):
        net = nn.init_network([4, 8, 6, 3], activations=["relu", "tanh", "identity"], seed=1)
        _, trace = nn.forward(net, np.random.default_rng(1).normal(size=(10, 4)), want_trace=True)
        for l, (pre, post) in enumerate(zip(trace.pre, trace.post)):
            expected = nn._act(net.layers[l].activation, pre)
            np.testing.assert_array_equal(post, expected)


class TestTrain:
    def test_zero_epochs_is_noop(self):
        net = nn.init_network([2, 4, 2], seed=0)
        data = SplitView(np.zeros((3, 2)), np.zeros(3, dtype=int), "classification")
        out, metrics = nn.train(net, data, nn.TrainConfig(epochs=0))
        assert metrics == []
        for a, b in zip(net.layers, out.layers):
            np.testing.assert_array_equal(a.weight, b.weight)

    def test_linear_regression_learns_slope(self):
        # closed-form least squares on y = 2x gives slope 2
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, size=(200, 1))
        y = 2.0 * x
        net = nn.Network(
            [
                nn.DenseLayer(np.array([[0.1]]), np.zeros(1), "identity"),
                nn.DenseLayer(np.array([[1.0]]), np.zeros(1), "identity"),
            ],
            head="reconstruction",
        )
        cfg = nn.TrainConfig(optimizer="sgd", learning_rate=0.1, batch_size=1, epochs=1, rng_seed=0)
        trained, _ = nn.train(net, SplitView(x, y, "reconstruction"), cfg)
        slope = trained.layers[1].weight[0, 0] * trained.layers[0].weight[0, 0]
        lstsq_slope = float(np.linalg.lstsq(x, y, rcond=None)[0][0, 0])
        assert abs(lstsq_slope - 2.0) < 1e-9
        assert abs(slope - 2.0) < 0.05

    def test_separable_blobs_reach_high_accuracy(self):
        from spectralprune.data import generate_blobs

        ds = generate_blobs(classes=2, dim=4, separation=8.0, n=4000, seed=3).make_splits(seed=3)
        # perceptron oracle confirms separability before asserting on the MLP
        train = ds.split("train")
        w = np.zeros(5)
        xb = np.hstack([train.inputs, np.ones((train.inputs.shape[0], 1))])
        yb = 2 * train.targets - 1
        for _ in range(50):
            mistakes = 0
            for xi, yi in zip(xb, yb):
                if yi * (w @ xi) <= 0:
                    w += yi * xi
                    mistakes += 1
            if mistakes == 0:
                break
        assert mistakes == 0, "oracle says data is not separable"
        net = nn.init_network([4, 16, 2], seed=3)
        cfg = nn.TrainConfig(learning_rate=0.01, batch_size=32, epochs=1, rng_seed=3)
        trained, _ = nn.train(net, train, cfg)
        assert nn.evaluate(trained, train) >= 0.95

    def test_seeded_determinism(self):
        from spectralprune.data import generate_blobs

        ds = generate_blobs(classes=3, dim=5, n=300, seed=1).make_splits(seed=1)
        cfg = nn.TrainConfig(epochs=2, rng_seed=9)
        net = nn.init_network([5, 8, 3], seed=9)
        a, ma = nn.train(net, ds.split("train"), cfg)
        b, mb = nn.train(net, ds.split("train"), cfg)
        assert ma == mb
        for la, lb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(la.weight, lb.weight)
            np.testing.assert_array_equal(la.bias, lb.bias)


class TestEvaluate:
    def test_perfect_classifier(self):
        # identity logits reproduce the one-hot labels exactly
        net = nn.Network(
            [
                nn.DenseLayer(np.eye(3), np.zeros(3), "identity"),
                nn.DenseLayer(np.eye(3), np.zeros(3), "identity"),
            ]
        )
        labels = np.array([0, 1, 2, 1])
        inputs = np.eye(3)[labels]
        assert nn.evaluate(net, SplitView(inputs, labels, "classification")) == 1.0

    def test_identity_reconstruction_zero_mse(self):
        net = nn.Network(
            [
                nn.DenseLayer(np.eye(2), np.zeros(2), "identity"),
                nn.DenseLayer(np.eye(2), np.zeros(2), "identity"),
            ],
            head="reconstruction",
        )
        x = np.random.default_rng(0).normal(size=(5, 2))
        assert nn.evaluate(net, SplitView(x, x, "reconstruction")) == 0.0

    def test_matches_independent_evaluation_loop(self):
        net = nn.init_network([4, 8, 3], seed=5)
        rng = np.random.default_rng(5)
        inputs = rng.normal(size=(40, 4))
        labels = rng.integers(0, 3, size=40)
        metric = nn.evaluate(net, SplitView(inputs, labels, "classification"))
        correct = 0
        for xi, yi in zip(inputs, labels):
            out, _ = nn.forward(net, xi[None, :])
            correct += int(np.argmax(out[0]) == yi)
        assert metric == correct / 40


class TestSurgery:
    def test_dead_unit_removal_preserves_outputs(self):
        net = nn.init_network([4, 6, 3], seed=2)
        net.layers[1].weight[:, 2] = 0.0  # unit 2's outgoing weights all zero
        pruned = nn.surgery_remove_units(net, 0, {2})
        batch = np.random.default_rng(2).normal(size=(12, 4))
        out_a, _ = nn.forward(net, batch)
        out_b, _ = nn.forward(pruned, batch)
        np.testing.assert_allclose(out_a, out_b, atol=1e-12)

    def test_shape_arithmetic(self):
        net = nn.init_network([5, 3, 4], seed=0)
        pruned = nn.surgery_remove_units(net, 0, {1})
        assert pruned.layers[0].weight.shape == (2, 5)
        assert pruned.layers[1].weight.shape == (4, 2)

    def test_lenet_300_100_param_drop(self):
        net = nn.init_network([784, 300, 100, 10], seed=0)
        assert nn.param_count(net) == 266610
        pruned = nn.surgery_remove_units(net, 0, range(150))
        pruned = nn.surgery_remove_units(pruned, 1, range(50))
        # per-unit formula: layer 0 unit costs 784+1+100, layer 1 unit 150+1+10
        expected = 266610 - 150 * (784 + 1 + 100) - 50 * (150 + 1 + 10)
        brute = sum(t.size for l in pruned.layers for t in (l.weight, l.bias))
        assert nn.param_count(pruned) == expected == brute

    def test_surgery_locality(self):
        net = nn.init_network([6, 5, 4, 3], seed=4)
        pruned = nn.surgery_remove_units(net, 1, {0, 3})
        keep = [1, 2]
        np.testing.assert_array_equal(pruned.layers[0].weight, net.layers[0].weight)
        np.testing.assert_array_equal(pruned.layers[0].bias, net.layers[0].bias)
        np.testing.assert_array_equal(pruned.layers[1].weight, net.layers[1].weight[keep])
        np.testing.assert_array_equal(pruned.layers[1].bias, net.layers[1].bias[keep])
        np.testing.assert_array_equal(pruned.layers[2].weight, net.layers[2].weight[:, keep])
        np.testing.assert_array_equal(pruned.layers[2].bias, net.layers[2].bias)

    def test_refuses_to_empty_a_layer(self):
        net = nn.init_network([2, 3, 2], seed=0)
        with pytest.raises(ConfigError):
            nn.surgery_remove_units(net, 0, {0, 1, 2})

    def test_out_of_range_unit(self):
        net = nn.init_network([2, 3, 2], seed=0)
        with pytest.raises(ConfigError):
            nn.surgery_remove_units(net, 0, {7})


class TestParamCount:
    def test_single_layer(self):
        net = nn.Network(
            [
                nn.DenseLayer(np.zeros((2, 2)), np.zeros(2), "identity"),
                nn.DenseLayer(np.zeros((1, 2)), np.zeros(1), "identity"),
            ]
        )
        assert nn.param_count(net) == 6 + 3

    @pytest.mark.parametrize("sizes", [[3, 4, 2], [7, 5, 5, 3], [2, 9, 2]])
    def test_matches_exhaustive_count(self, sizes):
        net = nn.init_network(sizes, seed=1)
        brute = 0
        for layer in net.layers:
            for tensor in (layer.weight, layer.bias):
                brute += int(np.prod(tensor.shape))
        assert nn.param_count(net) == brute


def test_gradient_matches_finite_differences():
    # <= 50 parameters: 3-4-2 classification net has 3*4+4 + 4*2+2 = 26
    net = nn.init_network([3, 4, 2], activations=["tanh", "identity"], seed=11)
    rng = np.random.default_rng(11)
    x = rng.normal(size=(7, 3))
    y = rng.integers(0, 2, size=7)
    _, grads = nn.loss_and_grads(net, x, y)
    step = 1e-5
    for l, layer in enumerate(net.layers):
        for tensor, grad in ((layer.weight, grads[l][0]), (layer.bias, grads[l][1])):
            it = np.nditer(tensor, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = tensor[idx]
                tensor[idx] = orig + step
                up, _ = nn.loss_and_grads(net, x, y)
                tensor[idx] = orig - step
                down, _ = nn.loss_and_grads(net, x, y)
                tensor[idx] = orig
                numeric = (up - down) / (2 * step)
                denom = max(abs(numeric), abs(grad[idx]), 1e-8)
                assert abs(numeric - grad[idx]) / denom < 1e-4


class TestCheckpoint:
    def test_round_trip_byte_identical(self, tmp_path):
        net = nn.init_network([4, 6, 3], seed=8)
        p1 = tmp_path / "a.spnet"
        p2 = tmp_path / "b.spnet"
        nn.save_checkpoint(net, p1, metadata={"seed": 8})
        loaded = nn.load_checkpoint(p1)
        nn.save_checkpoint(loaded, p2, metadata={"seed": 8})
        assert p1.read_bytes() == p2.read_bytes()
        for a, b in zip(net.layers, loaded.layers):
            np.testing.assert_array_equal(a.weight, b.weight)
            np.testing.assert_array_equal(a.bias, b.bias)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.spnet"
        path.write_bytes(b"NOTSP" + b"\x00" * 32)
        from spectralprune.errors import DataIOError

        with pytest.raises(DataIOError):
            nn.load_checkpoint(path)
