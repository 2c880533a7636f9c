"""Neural network layers with hand-derived forward and backward passes.

Layout is channel-last: batches are (B, H, W, C) float arrays. Convolutions
are valid cross-correlations (stride 1, no padding) realized as windowed
tensor contractions so the heavy lifting lands in BLAS. Weights are float32;
the arithmetic itself is dtype-generic, which the gradient-checking tests use
to run the same code paths in float64.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


class Conv2D:
    """Valid convolution (stride 1) with optional fused ReLU.

    kernel: (kh, kw, in_ch, out_ch), bias: (out_ch,).
    """

    def __init__(self, kernel_h, kernel_w, in_ch, out_ch, rng, relu=True):
        fan_in = kernel_h * kernel_w * in_ch
        fan_out = kernel_h * kernel_w * out_ch
        self.kernel = glorot_uniform(rng, (kernel_h, kernel_w, in_ch, out_ch), fan_in, fan_out)
        self.bias = np.zeros(out_ch, dtype=np.float32)
        self.relu = relu
        self._x = None
        self._mask = None
        self.grad_kernel = None
        self.grad_bias = None

    def param_count(self) -> int:
        kh, kw, ci, co = self.kernel.shape
        return (kh * kw * ci + 1) * co

    def params(self):
        return [("kernel", self.kernel), ("bias", self.bias)]

    def grads(self):
        return [("kernel", self.grad_kernel), ("bias", self.grad_bias)]

    def forward(self, x, training=False):
        kh, kw, ci, _ = self.kernel.shape
        if x.ndim != 4 or x.shape[3] != ci:
            raise ValueError(f"expected (B, H, W, {ci}) input, got {x.shape}")
        if x.shape[1] < kh or x.shape[2] < kw:
            raise ValueError(f"input {x.shape[1]}x{x.shape[2]} smaller than kernel {kh}x{kw}")
        self._x = x
        windows = sliding_window_view(x, (kh, kw), axis=(1, 2))  # (B, H', W', C, kh, kw)
        out = np.tensordot(windows, self.kernel, axes=([4, 5, 3], [0, 1, 2])) + self.bias
        if self.relu:
            self._mask = out > 0
            out = np.where(self._mask, out, 0)
        return out

    def backward(self, grad_out):
        kh, kw, _, _ = self.kernel.shape
        x = self._x
        out_h, out_w = grad_out.shape[1], grad_out.shape[2]
        if self.relu:
            grad_out = grad_out * self._mask
        windows = sliding_window_view(x, (kh, kw), axis=(1, 2))
        gk = np.tensordot(windows, grad_out, axes=([0, 1, 2], [0, 1, 2]))  # (C, kh, kw, out)
        self.grad_kernel = np.transpose(gk, (1, 2, 0, 3))
        self.grad_bias = grad_out.sum(axis=(0, 1, 2))
        # Scatter the per-window input gradients back onto the image plane.
        dcols = np.tensordot(grad_out, self.kernel, axes=([3], [3]))  # (B, H', W', kh, kw, C)
        grad_x = np.zeros_like(x)
        for di in range(kh):
            for dj in range(kw):
                grad_x[:, di : di + out_h, dj : dj + out_w, :] += dcols[:, :, :, di, dj, :]
        return grad_x


class MaxPool2x2:
    """2x2 max pooling with stride 2; a trailing odd row/column is dropped."""

    def __init__(self):
        self._in_shape = None
        self._argmax = None

    def param_count(self) -> int:
        return 0

    def forward(self, x, training=False):
        b, h, w, c = x.shape
        if h < 2 or w < 2:
            raise ValueError(f"spatial dims must be >= 2, got {x.shape}")
        h2, w2 = h // 2, w // 2
        self._in_shape = x.shape
        blocks = x[:, : h2 * 2, : w2 * 2, :].reshape(b, h2, 2, w2, 2, c)
        blocks = blocks.transpose(0, 1, 3, 2, 4, 5).reshape(b, h2, w2, 4, c)
        self._argmax = blocks.argmax(axis=3)
        return blocks.max(axis=3)

    def backward(self, grad_out):
        b, h, w, c = self._in_shape
        h2, w2 = h // 2, w // 2
        buf = np.zeros((b, h2, w2, 4, c), dtype=grad_out.dtype)
        np.put_along_axis(buf, self._argmax[:, :, :, None, :], grad_out[:, :, :, None, :], axis=3)
        grad_x = np.zeros((b, h, w, c), dtype=grad_out.dtype)
        grad_x[:, : h2 * 2, : w2 * 2, :] = (
            buf.reshape(b, h2, w2, 2, 2, c).transpose(0, 1, 3, 2, 4, 5).reshape(b, h2 * 2, w2 * 2, c)
        )
        return grad_x


class Flatten:
    def __init__(self):
        self._in_shape = None

    def param_count(self) -> int:
        return 0

    def forward(self, x, training=False):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._in_shape)


class Dropout:
    """Inverted dropout: kept units are scaled by 1/(1-rate) during training,
    inference is the identity."""

    def __init__(self, rate, rng):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng
        self._mask = None

    def param_count(self) -> int:
        return 0

    def forward(self, x, training=False):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (self.rng.random(x.shape) < keep).astype(x.dtype) / np.asarray(keep, dtype=x.dtype)
        return x * self._mask

    def backward(self, grad_out):
        if self._mask is None:
            return grad_out
        return grad_out * self._mask


class Dense:
    """Affine layer with optional fused ReLU. weight: (in, out), bias: (out,)."""

    def __init__(self, in_features, out_features, rng, relu=True):
        self.weight = glorot_uniform(rng, (in_features, out_features), in_features, out_features)
        self.bias = np.zeros(out_features, dtype=np.float32)
        self.relu = relu
        self._x = None
        self._mask = None
        self.grad_weight = None
        self.grad_bias = None

    def param_count(self) -> int:
        return self.weight.size + self.bias.size

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def grads(self):
        return [("weight", self.grad_weight), ("bias", self.grad_bias)]

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.weight.shape[0]:
            raise ValueError(f"expected (B, {self.weight.shape[0]}) input, got {x.shape}")
        self._x = x
        out = x @ self.weight + self.bias
        if self.relu:
            self._mask = out > 0
            out = np.where(self._mask, out, 0)
        return out

    def backward(self, grad_out):
        if self.relu:
            grad_out = grad_out * self._mask
        self.grad_weight = self._x.T @ grad_out
        self.grad_bias = grad_out.sum(axis=0)
        return grad_out @ self.weight.T
