"""Randomized gradient checks over neurons, residual units, heads and networks"""

import numpy as np

from layers.dist_layers import AffineHead
from layers.dist_neuron import (dist_neuron_forward, dist_neuron_grad, residual_unit_forward,
                                residual_unit_grad)
from layers.network_builder import build_network
from layers.neuron_mode import LogSumExp, PNorm
from numcore.grad_check import grad_check
from numcore.rng import Rng

# Case kinds, cycled in this order
GRAD_CASES = ["pnorm_neuron", "lse_neuron", "residual_unit", "affine_head", "network_input", "network_params",
              "conv_params"]

# Coordinates sampled per parameter array in the network cases
PARAM_COORDS = 8


def _neuron_case(rng, mode, tol):
    d = 2 + rng.randint(7)
    v = rng.uniform_array(2 * d, -1.0, 1.0)
    b = rng.uniform(-1.0, 1.0)

    def f(x):
        return dist_neuron_forward(x[:d], x[d:], b, mode)

    def grad(x):
        dz, dw, _ = dist_neuron_grad(x[:d], x[d:], b, mode)
        return np.concatenate([dz, dw])

    return grad_check(f, grad, v, tol=tol)


def _residual_case(rng, tol):
    d = 2 + rng.randint(7)
    z = rng.uniform_array(d)
    w = rng.uniform_array(d)
    c = rng.uniform(0.0, 0.9)
    j = rng.randint(d)
    mode = PNorm(8)
    return grad_check(lambda x: residual_unit_forward(x, w, 0.1, c, j, mode),
                      lambda x: residual_unit_grad(x, w, 0.1, c, j, mode)[0], z, tol=tol)


def _head_case(rng, tol):
    widths = [3 + rng.randint(4), 3 + rng.randint(4), 2 + rng.randint(3)]
    matrices = [rng.uniform_array((widths[1], widths[0]), -1.0, 1.0),
                rng.uniform_array((widths[2], widths[1]), -1.0, 1.0)]
    biases = [rng.uniform_array(widths[1], -0.5, 0.5), rng.uniform_array(widths[2], -0.5, 0.5)]
    head = AffineHead(matrices, biases)
    upstream = rng.uniform_array(widths[2], -1.0, 1.0)

    def f(x):
        out, _ = head.forward(x[None, :])
        return float(out[0] @ upstream)

    def grad(x):
        _, cache = head.forward(x[None, :])
        dx, _ = head.backward(cache, upstream[None, :])
        return dx[0]

    return grad_check(f, grad, rng.uniform_array(widths[0], -1.0, 1.0), tol=tol)


def _small_network(rng):
    mode = PNorm(8) if rng.uniform() < 0.5 else LogSumExp(20)
    head = [4] if rng.uniform() < 0.5 else []
    net = build_network(5, 3, [4, 4], rng, head_widths=head, residual_c=0.5, mode=mode)
    return net, rng.uniform_array(5), rng.uniform_array(3, -1.0, 1.0)


def _small_conv_network(rng):
    mode = PNorm(8) if rng.uniform() < 0.5 else LogSumExp(20)
    head = [4] if rng.uniform() < 0.5 else []
    # Smallest image the lenet preset accepts: 13x13 -> 5x5x8 -> 1x1x16
    net = build_network(13 * 13, 3, [6], rng, arch="lenet", image_shape=(13, 13, 1),
                        head_widths=head, mode=mode)
    return net, rng.uniform_array(13 * 13), rng.uniform_array(3, -1.0, 1.0)


def _network_input_case(rng, tol):
    net, x0, upstream = _small_network(rng)
    return grad_check(lambda x: float(net.forward(x[None, :])[0] @ upstream),
                      lambda x: net.input_gradient(x[None, :], upstream[None, :])[0], x0, tol=tol)


def param_coordinates(params, rng, per_array=PARAM_COORDS):
    """Pick up to `per_array` flat coordinates from every parameter array

    Returns:
        list: (array index, flat index) pairs covering every array
    """
    coords = []
    for i, p in enumerate(params):
        picks = rng.permutation(p.size)[:per_array]
        coords.extend((i, int(k)) for k in sorted(picks))
    return coords


def _params_case(net, x0, upstream, rng, tol):
    params = net.parameters()
    coords = param_coordinates(params, rng)

    def load(v):
        for (i, k), value in zip(coords, v):
            params[i].flat[k] = value

    def f(v):
        load(v)
        return float(net.forward(x0[None, :])[0] @ upstream)

    def grad(v):
        load(v)
        grads, _ = net.backward(x0[None, :], upstream[None, :])
        return np.array([grads[i].reshape(-1)[k] for i, k in coords])

    start = np.array([params[i].flat[k] for i, k in coords])
    return grad_check(f, grad, start, tol=tol)


def _network_params_case(rng, tol):
    net, x0, upstream = _small_network(rng)
    return _params_case(net, x0, upstream, rng, tol)


def _conv_params_case(rng, tol):
    net, x0, upstream = _small_conv_network(rng)
    return _params_case(net, x0, upstream, rng, tol)


def run_grad_suite(configs=50, seed=0, tol=1e-4):
    """Run `configs` random gradient checks

    Returns:
        list: (case name, GradCheckReport) pairs
    """
    rng = Rng(seed)
    results = []
    for idx in range(configs):
        kind = GRAD_CASES[idx % len(GRAD_CASES)]
        case_rng = rng.spawn(idx + 1)
        if kind == "pnorm_neuron":
            report = _neuron_case(case_rng, PNorm(8), tol)
        elif kind == "lse_neuron":
            report = _neuron_case(case_rng, LogSumExp(20), tol)
        elif kind == "residual_unit":
            report = _residual_case(case_rng, tol)
        elif kind == "affine_head":
            report = _head_case(case_rng, tol)
        elif kind == "network_input":
            report = _network_input_case(case_rng, tol)
        elif kind == "network_params":
            report = _network_params_case(case_rng, tol)
        else:
            report = _conv_params_case(case_rng, tol)
        results.append((kind, report))
    return results
