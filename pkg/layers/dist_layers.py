"""Layer types: dense and convolutional distance layers, affine+ReLU head"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from layers.dist_neuron import distance, distance_grad
from layers.neuron_mode import Exact
from numcore.tensor import as_tensor
from utils.errors import ParameterError, ShapeError


class DistLayer:
    """Dense layer of distance neurons, optionally with per-unit residual skips"""

    kind = "dist"

    def __init__(self, weights, bias, mode=None, residual_c=None):
        self.weights = as_tensor(weights, name="weights")
        if self.weights.ndim != 2:
            raise ShapeError(f"DistLayer weights must be 2-D, got shape {self.weights.shape}")
        self.bias = as_tensor(bias, shape=(self.weights.shape[0],), name="bias")
        self.mode = mode or Exact()
        if residual_c is not None:
            residual_c = float(residual_c)
            if not 0.0 <= residual_c < 1.0:
                raise ParameterError(f"Residual weight c must lie in [0, 1), got {residual_c}")
            if self.out_width != self.in_width:
                raise ShapeError(f"Residual layer needs equal widths, got {self.in_width} -> {self.out_width}")
        self.residual_c = residual_c

    @property
    def in_width(self):
        return self.weights.shape[1]

    @property
    def out_width(self):
        return self.weights.shape[0]

    def parameters(self):
        return [self.weights, self.bias]

    def forward(self, x):
        """Batch forward: (n, in) -> (n, out), plus the cache for backward"""
        diff = x[:, None, :] - self.weights[None, :, :]
        out = distance(diff, self.mode)
        if self.residual_c is not None:
            c = self.residual_c
            out = c * x + (1.0 - c) * out
        return out + self.bias, diff

    def backward(self, x, cache, upstream):
        """Return (input gradient, [weight gradient, bias gradient])"""
        g = distance_grad(cache, self.mode)
        if self.residual_c is not None:
            g = (1.0 - self.residual_c) * g
        dx = np.einsum("no,noi->ni", upstream, g)
        if self.residual_c is not None:
            dx = dx + self.residual_c * upstream
        dw = -np.einsum("no,noi->oi", upstream, g)
        db = upstream.sum(axis=0)
        return dx, [dw, db]


class ConvDistLayer:
    """Convolutional distance layer on HWC images (LeNet-style)

    Each output is the distance between an input patch and a kernel, plus
    bias. Outputs are laid out (H', W', out_channels), row-major.
    """

    kind = "conv"

    def __init__(self, kernels, bias, in_shape, stride=(1, 1), padding=0, mode=None):
        self.kernels = as_tensor(kernels, name="kernels")
        if self.kernels.ndim != 4:
            raise ShapeError(f"Kernels must be (out_c, in_c, kh, kw), got {self.kernels.shape}")
        self.bias = as_tensor(bias, shape=(self.kernels.shape[0],), name="bias")
        self.in_shape = tuple(int(v) for v in in_shape)
        if len(self.in_shape) != 3 or self.in_shape[2] != self.kernels.shape[1]:
            raise ShapeError(f"Input shape {self.in_shape} does not match kernel channels {self.kernels.shape[1]}")
        if np.isscalar(stride):
            stride = (stride, stride)
        self.stride = tuple(int(s) for s in stride)
        if min(self.stride) < 1:
            raise ParameterError(f"Stride must be positive, got {self.stride}")
        self.padding = int(padding)
        if self.padding < 0:
            raise ParameterError(f"Padding must be non-negative, got {self.padding}")
        self.mode = mode or Exact()
        self.residual_c = None

        h, w, _ = self.in_shape
        kh, kw = self.kernels.shape[2:]
        self.out_h = (h + 2 * self.padding - kh) // self.stride[0] + 1
        self.out_w = (w + 2 * self.padding - kw) // self.stride[1] + 1
        if self.out_h < 1 or self.out_w < 1:
            raise ShapeError(f"Kernel {kh}x{kw} does not fit input {self.in_shape}")

    @property
    def out_channels(self):
        return self.kernels.shape[0]

    @property
    def out_shape(self):
        return (self.out_h, self.out_w, self.out_channels)

    @property
    def in_width(self):
        return int(np.prod(self.in_shape))

    @property
    def out_width(self):
        return self.out_h * self.out_w * self.out_channels

    @property
    def weights(self):
        return self.kernels

    def parameters(self):
        return [self.kernels, self.bias]

    def _patches(self, x):
        n = x.shape[0]
        img = x.reshape((n,) + self.in_shape)
        if self.padding:
            p = self.padding
            img = np.pad(img, ((0, 0), (p, p), (p, p), (0, 0)))
        kh, kw = self.kernels.shape[2:]
        windows = sliding_window_view(img, (kh, kw), axis=(1, 2))
        windows = windows[:, ::self.stride[0], ::self.stride[1]][:, :self.out_h, :self.out_w]
        # (n, H', W', C, kh, kw) -> (n, H'W', C*kh*kw), same order as the kernels
        return windows.reshape(n, self.out_h * self.out_w, -1)

    def forward(self, x):
        patches = self._patches(x)
        flat_k = self.kernels.reshape(self.out_channels, -1)
        diff = patches[:, :, None, :] - flat_k[None, None, :, :]
        out = distance(diff, self.mode) + self.bias
        return out.reshape(x.shape[0], -1), diff

    def backward(self, x, cache, upstream):
        n = x.shape[0]
        up = upstream.reshape(n, self.out_h * self.out_w, self.out_channels)
        g = distance_grad(cache, self.mode)
        d_patches = np.einsum("nlo,nlok->nlk", up, g)
        dk = -np.einsum("nlo,nlok->ok", up, g).reshape(self.kernels.shape)
        db = up.sum(axis=(0, 1))

        h, w, c = self.in_shape
        p = self.padding
        kh, kw = self.kernels.shape[2:]
        sh, sw = self.stride
        d_img = np.zeros((n, h + 2 * p, w + 2 * p, c))
        d_patches = d_patches.reshape(n, self.out_h, self.out_w, c, kh, kw)
        for i in range(kh):
            for j in range(kw):
                d_img[:, i:i + sh * self.out_h:sh, j:j + sw * self.out_w:sw, :] += d_patches[..., i, j]
        if p:
            d_img = d_img[:, p:-p, p:-p, :]
        return d_img.reshape(n, -1), [dk, db]


class AffineHead:
    """Affine+ReLU stack ending in an affine map to class logits"""

    def __init__(self, matrices, biases):
        if len(matrices) == 0 or len(matrices) != len(biases):
            raise ShapeError("Head needs one bias per matrix and at least one layer")
        self.matrices = [as_tensor(m, name="head matrix") for m in matrices]
        self.biases = [as_tensor(b, shape=(m.shape[0],), name="head bias")
                       for m, b in zip(self.matrices, biases)]
        for prev, nxt in zip(self.matrices, self.matrices[1:]):
            if prev.shape[0] != nxt.shape[1]:
                raise ShapeError(f"Head widths do not chain: {prev.shape} then {nxt.shape}")

    @property
    def in_width(self):
        return self.matrices[0].shape[1]

    @property
    def out_width(self):
        return self.matrices[-1].shape[0]

    def parameters(self):
        params = []
        for m, b in zip(self.matrices, self.biases):
            params.extend([m, b])
        return params

    def forward(self, x):
        cache = []
        h = x
        last = len(self.matrices) - 1
        for idx, (m, b) in enumerate(zip(self.matrices, self.biases)):
            pre = h @ m.T + b
            cache.append((h, pre))
            h = pre if idx == last else np.maximum(pre, 0.0)
        return h, cache

    def backward(self, cache, upstream):
        grads = []
        g = upstream
        last = len(self.matrices) - 1
        for idx in range(last, -1, -1):
            h_in, pre = cache[idx]
            if idx != last:
                g = g * (pre > 0)
            grads.append(g.sum(axis=0))
            grads.append(g.T @ h_in)
            g = g @ self.matrices[idx]
        grads.reverse()
        return g, grads

    def propagate_interval(self, lower, upper):
        """Interval arithmetic through the head: split weights by sign, clamp ReLUs"""
        last = len(self.matrices) - 1
        for idx, (m, b) in enumerate(zip(self.matrices, self.biases)):
            pos = np.maximum(m, 0.0)
            neg = np.minimum(m, 0.0)
            new_lower = lower @ pos.T + upper @ neg.T + b
            new_upper = upper @ pos.T + lower @ neg.T + b
            lower, upper = new_lower, new_upper
            if idx != last:
                lower = np.maximum(lower, 0.0)
                upper = np.maximum(upper, 0.0)
        return lower, upper
