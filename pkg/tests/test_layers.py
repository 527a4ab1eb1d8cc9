"""Distance neurons, layers, networks and the model file"""

import math

import numpy as np
import pytest

from layers.dist_layers import AffineHead, ConvDistLayer, DistLayer
from layers.dist_neuron import (dist_neuron_forward, dist_neuron_grad, distance, residual_unit_forward,
                                residual_unit_grad)
from layers.grad_suite import GRAD_CASES, PARAM_COORDS, param_coordinates, run_grad_suite
from layers.model_format import (deserialize_model, load_model, read_model_tags, save_model,
                                 serialize_model)
from layers.network import Network, network_backward, network_forward
from layers.network_builder import build_network
from layers.neuron_mode import LSE, PNORM, Exact, LogSumExp, NeuronMode, PNorm, parse_mode
from numcore.grad_check import grad_check
from numcore.rng import Rng
from utils.errors import (ChecksumError, ModelFileError, ModelFormatError, ModelTruncationError,
                          ParameterError, ShapeError)


def linf(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)).max(axis=-1)


@pytest.fixture
def exact_net():
    return build_network(6, 3, [8, 8], Rng(1), residual_c=0.5)


@pytest.fixture
def full_net():
    """LeNet backbone, residual layer and head: every layer type at once"""
    return build_network(256, 3, [8, 8], Rng(2), arch="lenet", image_shape=(16, 16, 1),
                         head_widths=[5], residual_c=0.25, mode=PNorm(8))


class TestNeuronMode:

    def test_parameter_rules(self):
        with pytest.raises(ParameterError):
            NeuronMode("exact", 2.0)
        with pytest.raises(ParameterError):
            PNorm(1.0)
        with pytest.raises(ParameterError):
            LogSumExp(0.0)
        with pytest.raises(ParameterError, match="expected one of exact, pnorm, lse"):
            parse_mode("relu:2")

    def test_describe_round_trip(self):
        for mode in (Exact(), PNorm(8), LogSumExp(20.5)):
            assert parse_mode(mode.describe()) == mode


class TestDistNeuron:

    def test_exact_is_max_abs(self):
        assert dist_neuron_forward([1, -2, 0], [0, 0, 0], 0.0, Exact()) == 2.0

    def test_lse_all_equal(self):
        value = dist_neuron_forward([0.3, 0.3, 0.3], [0.3, 0.3, 0.3], 0.0, LogSumExp(4))
        assert value == pytest.approx(math.log(3) / 4, abs=1e-12)
        assert value == pytest.approx(0.274653, abs=1e-6)

    def test_pnorm_three_four_five(self):
        assert dist_neuron_forward([3, -4], [0, 0], 0.0, PNorm(2)) == pytest.approx(5.0, abs=1e-12)

    def test_lse_large_p_close_to_max(self):
        value = dist_neuron_forward([1, -2, 0], [0, 0, 0], 0.0, LogSumExp(100))
        assert 2.0 <= value <= 2.0 + math.log(3) / 100

    def test_lse_does_not_overflow(self):
        value = dist_neuron_forward([1000.0, -999.0], [0.0, 0.0], 1.0, LogSumExp(50))
        assert np.isfinite(value)
        assert value == pytest.approx(1001.0, abs=1e-9)

    def test_bias_is_added(self):
        assert dist_neuron_forward([1, -2, 0], [0, 0, 0], 0.5, Exact()) == 2.5

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            dist_neuron_forward([1, 2], [0, 0, 0], 0.0, Exact())

    def test_exact_gradient_is_one_hot(self):
        dz, dw, db = dist_neuron_grad([1, -2, 0], [0, 0, 0], 0.0, Exact())
        np.testing.assert_array_equal(dz, [0, -1, 0])
        np.testing.assert_array_equal(dw, [0, 1, 0])
        assert db == 1.0

    def test_exact_tie_takes_lowest_index(self):
        dz, _, _ = dist_neuron_grad([1, -1], [0, 0], 0.0, Exact())
        np.testing.assert_array_equal(dz, [1, 0])

    def test_lse_gradient_has_unit_l1_norm(self):
        rng = Rng(5)
        for _ in range(20):
            z, w = rng.uniform_array(7, -2, 2), rng.uniform_array(7, -2, 2)
            dz, _, _ = dist_neuron_grad(z, w, 0.0, LogSumExp(rng.uniform(0.5, 50)))
            assert np.abs(dz).sum() == pytest.approx(1.0, abs=1e-12)

    def test_sandwiches(self):
        rng = Rng(6)
        for _ in range(500):
            d = 1 + rng.randint(10)
            diff = rng.uniform_array(d, -3, 3)
            top = np.abs(diff).max()
            p = rng.uniform(1.5, 64)
            lse = distance(diff, NeuronMode(LSE, p))
            assert -1e-12 <= lse - top <= math.log(d) / p + 1e-12
            pn = distance(diff, NeuronMode(PNORM, p))
            assert top - 1e-12 <= pn <= d ** (1.0 / p) * top + 1e-12

    @pytest.mark.parametrize("d", [2, 16, 784])
    @pytest.mark.parametrize("p", [1.0, 10.0, 100.0])
    def test_lse_sandwich_grid(self, d, p):
        # 9 grid points x 11112 rows covers 1e5 inputs
        diff = Rng(int(d * 1000 + p)).uniform_array((11112, d), -3, 3)
        gap = distance(diff, LogSumExp(p)) - np.abs(diff).max(axis=-1)
        assert gap.min() >= 0.0
        assert gap.max() <= math.log(d) / p + 1e-12


class TestResidualUnit:

    def test_c_zero_is_exact_neuron(self):
        z, w = [0.2, -0.7, 0.4], [0.1, 0.1, 0.9]
        assert residual_unit_forward(z, w, 0.3, 0.0, 1) == dist_neuron_forward(z, w, 0.3, Exact())

    def test_hand_value(self):
        assert residual_unit_forward([1, 0], [0, 0], 0.0, 0.5, 0) == pytest.approx(1.0)

    def test_c_out_of_range(self):
        with pytest.raises(ParameterError):
            residual_unit_forward([1, 0], [0, 0], 0.0, 1.0, 0)
        with pytest.raises(ParameterError):
            residual_unit_forward([1, 0], [0, 0], 0.0, -0.1, 0)

    def test_one_lipschitz(self):
        rng = Rng(7)
        w = rng.uniform_array(5)
        for _ in range(10 ** 4):
            z, z2 = rng.uniform_array(5, -1, 1), rng.uniform_array(5, -1, 1)
            c = rng.uniform(0.0, 0.99)
            j = rng.randint(5)
            gap = abs(residual_unit_forward(z, w, 0.1, c, j) - residual_unit_forward(z2, w, 0.1, c, j))
            assert gap <= linf(z, z2) + 1e-12

    def test_gradient(self):
        w = np.array([0.1, 0.5, -0.3])
        report = grad_check(lambda z: residual_unit_forward(z, w, 0.0, 0.4, 2, PNorm(8)),
                            lambda z: residual_unit_grad(z, w, 0.0, 0.4, 2, PNorm(8))[0],
                            [0.7, -0.2, 0.3])
        assert report.passed


class TestLayers:

    def test_residual_needs_equal_widths(self):
        with pytest.raises(ShapeError):
            DistLayer(np.zeros((3, 4)), np.zeros(3), residual_c=0.5)

    def test_conv_matches_patchwise_distance(self):
        rng = Rng(8)
        image = rng.uniform_array((3, 3, 1))
        kernels = rng.uniform_array((2, 1, 2, 2))
        layer = ConvDistLayer(kernels, np.array([0.0, 0.5]), (3, 3, 1))
        out, _ = layer.forward(image.reshape(1, -1))
        out = out.reshape(layer.out_shape)
        for i in range(2):
            for j in range(2):
                patch = image[i:i + 2, j:j + 2, 0]
                for c in range(2):
                    expected = np.abs(patch - kernels[c, 0]).max() + [0.0, 0.5][c]
                    assert out[i, j, c] == pytest.approx(expected, abs=1e-15)

    def test_conv_gradient(self):
        rng = Rng(9)
        layer = ConvDistLayer(rng.uniform_array((2, 1, 2, 2)), np.zeros(2), (4, 4, 1), padding=1, mode=PNorm(8))
        upstream = rng.uniform_array(layer.out_width, -1, 1)

        def f(x):
            out, _ = layer.forward(x[None, :])
            return float(out[0] @ upstream)

        def grad(x):
            _, cache = layer.forward(x[None, :])
            dx, _ = layer.backward(x[None, :], cache, upstream[None, :])
            return dx[0]

        assert grad_check(f, grad, rng.uniform_array(16)).passed

    def test_conv_shape_errors(self):
        with pytest.raises(ShapeError):
            ConvDistLayer(np.zeros((1, 1, 5, 5)), np.zeros(1), (3, 3, 1))
        with pytest.raises(ShapeError):
            ConvDistLayer(np.zeros((1, 2, 2, 2)), np.zeros(1), (3, 3, 1))

    def test_head_interval_of_difference_row(self):
        head = AffineHead([np.array([[1.0, -1.0]])], [np.zeros(1)])
        a, b, r = 0.7, 0.2, 0.05
        lower, upper = head.propagate_interval(np.array([[a - r, b - r]]), np.array([[a + r, b + r]]))
        assert lower[0, 0] == pytest.approx(a - b - 2 * r)
        assert upper[0, 0] == pytest.approx(a - b + 2 * r)

    def test_head_interval_contains_outputs(self):
        rng = Rng(10)
        head = AffineHead([rng.uniform_array((4, 3), -1, 1), rng.uniform_array((2, 4), -1, 1)],
                          [rng.uniform_array(4, -0.5, 0.5), rng.uniform_array(2, -0.5, 0.5)])
        center = rng.uniform_array((1, 3))
        lower, upper = head.propagate_interval(center - 0.1, center + 0.1)
        points = center + rng.uniform_array((500, 3), -0.1, 0.1)
        out, _ = head.forward(points)
        assert np.all(out >= lower - 1e-12) and np.all(out <= upper + 1e-12)


class TestNetwork:

    def test_zero_weights_give_negated_norm(self):
        net = Network([DistLayer(np.zeros((3, 4)), np.zeros(3))])
        x = np.array([0.1, -0.6, 0.3, 0.2])
        np.testing.assert_allclose(network_forward(net, x), [-0.6, -0.6, -0.6])

    def test_two_layer_hand_composition(self):
        first = DistLayer([[0.0, 0.0], [1.0, 1.0]], [0.0, 0.0])
        second = DistLayer([[0.5, 0.5], [0.0, 1.0]], [0.1, 0.0])
        net = Network([first, second])
        # layer 1: [0.7, 0.8]; layer 2: [0.3 + 0.1, 0.7]
        np.testing.assert_allclose(network_forward(net, [0.2, 0.7]), [-0.4, -0.7], atol=1e-15)

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            Network([DistLayer(np.zeros((3, 4)), np.zeros(3)), DistLayer(np.zeros((2, 4)), np.zeros(2))])
        net = Network([DistLayer(np.zeros((3, 4)), np.zeros(3))])
        with pytest.raises(ShapeError):
            network_forward(net, np.zeros(5))

    def test_width_and_depth(self, exact_net):
        assert exact_net.width == 8
        assert exact_net.depth == 3

    def test_small_perturbation_moves_logits_little(self, exact_net):
        rng = Rng(11)
        x = rng.uniform_array((200, 6))
        delta = rng.uniform_array((200, 6), -0.1, 0.1)
        delta[:, 0] = 0.1
        change = np.abs(exact_net.forward(x + delta) - exact_net.forward(x)).max()
        assert change <= 0.1 + 1e-12

    def test_one_lipschitz_sampled(self, exact_net):
        rng = Rng(12)
        x = rng.uniform_array((10 ** 4, 6))
        x2 = rng.uniform_array((10 ** 4, 6))
        gaps = linf(exact_net.forward(x), exact_net.forward(x2))
        assert np.all(gaps <= linf(x, x2) + 1e-9)

    def test_conv_network_one_lipschitz(self):
        net = build_network(256, 3, [8], Rng(13), arch="lenet", image_shape=(16, 16, 1))
        rng = Rng(14)
        x = rng.uniform_array((200, 256))
        x2 = np.clip(x + rng.uniform_array((200, 256), -0.2, 0.2), 0, 1)
        assert np.all(linf(net.forward(x), net.forward(x2)) <= linf(x, x2) + 1e-9)

    def test_zero_upstream_gives_zero_gradients(self, full_net):
        x = Rng(15).uniform_array(256)
        grads, dx = network_backward(full_net, x, np.zeros(3))
        assert all(not np.any(g) for g in grads)
        assert not np.any(dx)

    def test_exact_input_gradient_l1_bound(self, exact_net):
        rng = Rng(16)
        for _ in range(50):
            upstream = rng.uniform_array(3, -1, 1)
            _, dx = network_backward(exact_net, rng.uniform_array(6), upstream)
            assert np.abs(dx).sum() <= np.abs(upstream).sum() + 1e-12

    @pytest.mark.parametrize("mode", [PNorm(8), LogSumExp(20)])
    def test_input_gradient_matches_finite_differences(self, mode):
        net = build_network(5, 3, [4, 4], Rng(17), mode=mode, residual_c=0.5, head_widths=[4])
        upstream = np.array([0.3, -0.5, 0.8])
        report = grad_check(lambda x: float(network_forward(net, x) @ upstream),
                            lambda x: network_backward(net, x, upstream)[1],
                            Rng(18).uniform_array(5))
        assert report.passed

    def test_exact_view_leaves_original(self, full_net):
        view = full_net.exact_view()
        assert view.is_exact
        assert full_net.first_surrogate_layer() == 0


class TestGradSuite:

    def test_all_configurations_pass(self):
        results = run_grad_suite(configs=50, seed=0, tol=1e-4)
        assert len(results) == 50
        assert {kind for kind, _ in results} == set(GRAD_CASES)
        failed = [(kind, report.max_rel_err) for kind, report in results if not report.passed]
        assert failed == []

    def test_every_case_checks_coordinates(self):
        for kind, report in run_grad_suite(configs=14, seed=3, tol=1e-4):
            assert report.checked > 0, kind
            assert report.passed, kind

    def test_coordinates_cover_every_parameter_array(self):
        net = build_network(13 * 13, 3, [6], Rng(2), arch="lenet", image_shape=(13, 13, 1), head_widths=[4])
        params = net.parameters()
        coords = param_coordinates(params, Rng(5))
        assert {i for i, _ in coords} == set(range(len(params)))
        # conv kernels, conv bias, dist weights, dist bias, head matrices and biases
        assert len(params) == 10
        for i, p in enumerate(params):
            assert sum(1 for j, _ in coords if j == i) == min(PARAM_COORDS, p.size)

    def test_wrong_last_parameter_gradient_is_caught(self, monkeypatch):
        original = Network.backward

        def drop_last(self, x, upstream, cache=None):
            grads, dx = original(self, x, upstream, cache)
            grads[-1] = np.zeros_like(grads[-1])
            return grads, dx

        monkeypatch.setattr(Network, "backward", drop_last)
        results = dict(run_grad_suite(configs=len(GRAD_CASES), seed=0, tol=1e-4))
        assert results["network_input"].passed
        assert not results["network_params"].passed
        assert not results["conv_params"].passed


class TestModelFormat:

    def test_round_trip_is_bit_exact(self, full_net):
        blob = serialize_model(full_net)
        loaded = deserialize_model(blob)
        assert loaded.describe() == full_net.describe()
        assert loaded.negate_logits == full_net.negate_logits
        for a, b in zip(full_net.parameters(), loaded.parameters()):
            assert a.shape == b.shape
            assert a.tobytes() == b.tobytes()
        assert serialize_model(loaded) == blob

    def test_layout(self, exact_net):
        blob = serialize_model(exact_net)
        assert blob[:4] == b"LNFC"
        assert int.from_bytes(blob[4:8], "little") == 1

    def test_tags(self, exact_net):
        blob = serialize_model(exact_net, tags={"seed": 7, "ema": "true"})
        assert read_model_tags(blob) == {"seed": "7", "ema": "true"}
        assert deserialize_model(blob).describe() == exact_net.describe()

    def test_bad_magic(self, exact_net):
        blob = serialize_model(exact_net)
        with pytest.raises(ModelFormatError):
            deserialize_model(b"LNFX" + blob[4:])

    def test_flipped_payload_byte(self, exact_net):
        blob = bytearray(serialize_model(exact_net))
        blob[-10] ^= 0x01
        with pytest.raises(ChecksumError):
            deserialize_model(bytes(blob))

    def test_truncated(self, exact_net):
        blob = serialize_model(exact_net)
        with pytest.raises(ModelTruncationError):
            deserialize_model(blob[:-20])
        with pytest.raises(ModelTruncationError):
            deserialize_model(blob[:6])

    def test_file_round_trip(self, tmp_path, exact_net):
        path = tmp_path / "model.lnfc"
        save_model(exact_net, path)
        x = Rng(19).uniform_array((5, 6))
        np.testing.assert_array_equal(load_model(path).forward(x), exact_net.forward(x))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelFileError):
            load_model(tmp_path / "absent.lnfc")
