"""l_inf-dist network: distance layers, optional affine head"""

import copy

import numpy as np

from layers.dist_layers import AffineHead, ConvDistLayer, DistLayer
from layers.neuron_mode import Exact
from numcore.tensor import as_batch
from utils.errors import ShapeError


class Network:
    """Ordered distance layers, then (optionally) an affine+ReLU head

    With ``negate_logits`` the last distance layer's outputs are negated
    before the head, so a smaller distance means a larger logit.
    """

    def __init__(self, dist_layers, head=None, negate_logits=True):
        if not dist_layers:
            raise ShapeError("Network needs at least one distance layer")
        for idx, (prev, nxt) in enumerate(zip(dist_layers, dist_layers[1:])):
            if prev.out_width != nxt.in_width:
                raise ShapeError(f"Layer {idx} outputs {prev.out_width} values but layer {idx + 1} expects {nxt.in_width}")
        if head is not None and head.in_width != dist_layers[-1].out_width:
            raise ShapeError(f"Head expects {head.in_width} inputs, backbone gives {dist_layers[-1].out_width}")
        self.dist_layers = list(dist_layers)
        self.head = head
        self.negate_logits = bool(negate_logits)

    @property
    def in_width(self):
        return self.dist_layers[0].in_width

    @property
    def num_classes(self):
        return self.head.out_width if self.head is not None else self.dist_layers[-1].out_width

    @property
    def width(self):
        """W: the largest distance-layer output width"""
        return max(layer.out_width for layer in self.dist_layers)

    @property
    def depth(self):
        """L: the number of distance layers"""
        return len(self.dist_layers)

    @property
    def is_exact(self):
        return all(layer.mode.is_exact for layer in self.dist_layers)

    def first_surrogate_layer(self):
        """Index of the first non-Exact layer, or None"""
        for idx, layer in enumerate(self.dist_layers):
            if not layer.mode.is_exact:
                return idx
        return None

    def set_mode(self, mode):
        """Switch every distance layer to mode"""
        for layer in self.dist_layers:
            layer.mode = mode

    def exact_view(self):
        """Copy sharing no state, with every layer in Exact mode"""
        net = self.copy()
        net.set_mode(Exact())
        return net

    def parameters(self):
        """All parameter arrays in serialization order (mutable in place)"""
        params = []
        for layer in self.dist_layers:
            params.extend(layer.parameters())
        if self.head is not None:
            params.extend(self.head.parameters())
        return params

    def load_parameters(self, values):
        """Copy values into the parameter arrays, in parameters() order"""
        params = self.parameters()
        if len(values) != len(params):
            raise ShapeError(f"Expected {len(params)} parameter arrays, got {len(values)}")
        for target, value in zip(params, values):
            if np.shape(value) != target.shape:
                raise ShapeError(f"Parameter shape {np.shape(value)} does not match {target.shape}")
            target[...] = value

    def copy(self):
        return copy.deepcopy(self)

    def backbone_forward(self, x):
        """Distance-layer outputs (negated if configured), before any head"""
        h = x
        for layer in self.dist_layers:
            h, _ = layer.forward(h)
        return -h if self.negate_logits else h

    def forward(self, x):
        """Batch logits for an (n, d) input"""
        h = self.backbone_forward(x)
        if self.head is not None:
            h, _ = self.head.forward(h)
        return h

    def forward_with_cache(self, x):
        caches = []
        h = x
        for layer in self.dist_layers:
            out, cache = layer.forward(h)
            caches.append((h, cache))
            h = out
        if self.negate_logits:
            h = -h
        head_cache = None
        if self.head is not None:
            h, head_cache = self.head.forward(h)
        return h, (caches, head_cache)

    def backward(self, x, upstream, cache=None):
        """Reverse-mode pass for a batch

        Args:
            x: (n, d) input batch
            upstream: (n, k) gradient of the objective with respect to the logits
            cache: Cache from forward_with_cache(x), recomputed when absent

        Returns:
            tuple: (parameter gradients in parameters() order summed over the
            batch, input gradient of shape (n, d))
        """
        if cache is None:
            _, cache = self.forward_with_cache(x)
        caches, head_cache = cache
        grads = []
        g = upstream
        if self.head is not None:
            g, head_grads = self.head.backward(head_cache, g)
        else:
            head_grads = []
        if self.negate_logits:
            g = -g
        layer_grads = []
        for layer, (h_in, cache) in zip(reversed(self.dist_layers), reversed(caches)):
            g, lg = layer.backward(h_in, cache, g)
            layer_grads.append(lg)
        for lg in reversed(layer_grads):
            grads.extend(lg)
        grads.extend(head_grads)
        return grads, g

    def input_gradient(self, x, upstream):
        _, dx = self.backward(x, upstream)
        return dx

    def predict(self, x):
        return np.argmax(self.forward(x), axis=1)

    def describe(self):
        parts = []
        for layer in self.dist_layers:
            tag = "conv" if isinstance(layer, ConvDistLayer) else "dist"
            res = f",c={layer.residual_c}" if layer.residual_c is not None else ""
            parts.append(f"{tag}({layer.out_width},{layer.mode.describe()}{res})")
        if self.head is not None:
            parts.append("head(" + ",".join(str(m.shape[0]) for m in self.head.matrices) + ")")
        return " -> ".join(parts)


def network_forward(net, x):
    """Logits for a single input vector (or a batch)"""
    batch, single = as_batch(x, net.in_width)
    logits = net.forward(batch)
    return logits[0] if single else logits


def network_backward(net, x, upstream):
    """Parameter and input gradients for a single input vector (or a batch)"""
    batch, single = as_batch(x, net.in_width)
    up, _ = as_batch(upstream, net.num_classes, name="upstream")
    if up.shape[0] != batch.shape[0]:
        raise ShapeError(f"Upstream batch {up.shape[0]} does not match input batch {batch.shape[0]}")
    grads, dx = net.backward(batch, up)
    return grads, (dx[0] if single else dx)


__all__ = ["Network", "DistLayer", "ConvDistLayer", "AffineHead", "network_forward", "network_backward"]
