"""Neural network layers with hand-written forward and backward passes.

Every layer consumes and produces batched numpy arrays. ``forward`` returns
``(output, cache)``; ``backward`` takes the cache and the output gradient,
accumulates parameter gradients into each Parameter's ``grad`` buffer, and
returns the input gradient. Caches are per-call, so inference on a frozen
model is safe from multiple threads.

Shape conventions are channels-last throughout: dense (N, features...),
conv1d (N, length, channels), conv2d and friends (N, height, width,
channels).
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Parameter",
    "Layer",
    "Dense",
    "Conv1d",
    "Conv2d",
    "BatchNorm",
    "ReLU",
    "LeakyReLU",
    "Sigmoid",
    "Upsample2x",
    "MaxOverTime",
    "Dropout",
    "Reshape",
    "ResidualBlock",
]


class Parameter:
    """A trainable array paired with a same-shape gradient buffer."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad = np.zeros_like(value)

    @property
    def shape(self):
        return self.value.shape


def _he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    # centered uniform with half-width sqrt(2 / fan_in)
    limit = math.sqrt(2.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    kind = "layer"

    def params(self) -> dict[str, Parameter]:
        return {}

    def state(self) -> dict[str, np.ndarray]:
        """Non-trainable arrays that must survive checkpointing."""
        return {}

    def forward(self, x, mode="train", rng=None):
        raise NotImplementedError

    def backward(self, cache, gy):
        raise NotImplementedError


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int, rng, dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        self.w = Parameter(_he_uniform(rng, (in_features, out_features), in_features, dtype))
        self.b = Parameter(np.zeros(out_features, dtype=dtype))

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x, mode="train", rng=None):
        x2 = x.reshape(x.shape[0], -1)
        if x2.shape[1] != self.in_features:
            raise ValueError(f"dense expected {self.in_features} features, got {x2.shape[1]}")
        return x2 @ self.w.value + self.b.value, (x.shape, x2)

    def backward(self, cache, gy):
        x_shape, x2 = cache
        self.w.grad += x2.T @ gy
        self.b.grad += gy.sum(axis=0)
        return (gy @ self.w.value.T).reshape(x_shape)


class Conv1d(Layer):
    """Valid 1D convolution along the sequence axis ((N, L, C_in) input)."""

    kind = "conv1d"

    def __init__(self, window: int, in_channels: int, out_channels: int, rng, dtype=np.float32):
        self.window = window
        self.in_channels = in_channels
        self.out_channels = out_channels
        fan_in = window * in_channels
        self.w = Parameter(_he_uniform(rng, (window, in_channels, out_channels), fan_in, dtype))
        self.b = Parameter(np.zeros(out_channels, dtype=dtype))

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x, mode="train", rng=None):
        n, length, c = x.shape
        if c != self.in_channels:
            raise ValueError(f"conv1d expected {self.in_channels} channels, got {c}")
        if length < self.window:
            raise ValueError(f"sequence length {length} < window {self.window}")
        l_out = length - self.window + 1
        # (N, L_out, C, f) -> (N, L_out, f, C) to match the (f, C) kernel layout
        cols = sliding_window_view(x, self.window, axis=1).transpose(0, 1, 3, 2)
        cols2 = np.ascontiguousarray(cols).reshape(n * l_out, self.window * c)
        w2 = self.w.value.reshape(self.window * c, self.out_channels)
        y = (cols2 @ w2 + self.b.value).reshape(n, l_out, self.out_channels)
        return y, (x.shape, cols2)

    def backward(self, cache, gy):
        x_shape, cols2 = cache
        n, length, c = x_shape
        l_out = length - self.window + 1
        gy2 = gy.reshape(n * l_out, self.out_channels)
        self.w.grad += (cols2.T @ gy2).reshape(self.w.shape)
        self.b.grad += gy2.sum(axis=0)
        w2 = self.w.value.reshape(self.window * c, self.out_channels)
        gcols = (gy2 @ w2.T).reshape(n, l_out, self.window, c)
        gx = np.zeros(x_shape, dtype=gy.dtype)
        for i in range(self.window):
            gx[:, i : i + l_out, :] += gcols[:, :, i, :]
        return gx


class Conv2d(Layer):
    """2D convolution on (N, H, W, C) input; kernel laid out (kh, kw, C_in, C_out)."""

    kind = "conv2d"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng,
        stride: int = 1,
        padding: int = 0,
        dtype=np.float32,
    ):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size * kernel_size
        self.w = Parameter(
            _he_uniform(rng, (kernel_size, kernel_size, in_channels, out_channels), fan_in, dtype)
        )
        self.b = Parameter(np.zeros(out_channels, dtype=dtype))

    def params(self):
        return {"w": self.w, "b": self.b}

    def _out_size(self, size: int) -> int:
        return (size + 2 * self.padding - self.kernel_size) // self.stride + 1

    def forward(self, x, mode="train", rng=None):
        n, h, w, c = x.shape
        if c != self.in_channels:
            raise ValueError(f"conv2d expected {self.in_channels} channels, got {c}")
        k, s, p = self.kernel_size, self.stride, self.padding
        if h + 2 * p < k or w + 2 * p < k:
            raise ValueError(f"input {h}x{w} too small for kernel {k} with padding {p}")
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        ho, wo = self._out_size(h), self._out_size(w)
        win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::s, ::s]
        # (N, Ho, Wo, C, kh, kw) -> (N, Ho, Wo, kh, kw, C): contiguous k*C runs
        cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(
            n * ho * wo, k * k * c
        )
        w2 = self.w.value.reshape(k * k * c, self.out_channels)
        y = (cols @ w2 + self.b.value).reshape(n, ho, wo, self.out_channels)
        return y, (x.shape, cols)

    def backward(self, cache, gy):
        x_shape, cols = cache
        n, h, w, c = x_shape
        k, s, p = self.kernel_size, self.stride, self.padding
        ho, wo = self._out_size(h), self._out_size(w)
        gy2 = gy.reshape(n * ho * wo, self.out_channels)
        self.w.grad += (cols.T @ gy2).reshape(self.w.shape)
        self.b.grad += gy2.sum(axis=0)
        w2 = self.w.value.reshape(k * k * c, self.out_channels)
        gcols = (gy2 @ w2.T).reshape(n, ho, wo, k, k, c)
        gxp = np.zeros((n, h + 2 * p, w + 2 * p, c), dtype=gy.dtype)
        for i in range(k):
            for j in range(k):
                gxp[:, i : i + s * ho : s, j : j + s * wo : s, :] += gcols[:, :, :, i, j, :]
        return gxp[:, p : p + h, p : p + w, :] if p else gxp


class BatchNorm(Layer):
    """Batch normalization over the trailing channel axis of (N, H, W, C)
    or (N, C) input."""

    kind = "batchnorm"

    def __init__(self, num_features: int, rng=None, momentum: float = 0.9, eps: float = 1e-5, dtype=np.float32):
        self.num_features = num_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(num_features, dtype=dtype))
        self.beta = Parameter(np.zeros(num_features, dtype=dtype))
        self.running_mean = np.zeros(num_features, dtype=dtype)
        self.running_var = np.ones(num_features, dtype=dtype)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def _axes_and_bshape(self, ndim):
        if ndim == 2:
            return (0,), (1, self.num_features)
        if ndim == 4:
            return (0, 1, 2), (1, 1, 1, self.num_features)
        raise ValueError(f"batchnorm supports 2D or 4D input, got {ndim}D")

    def forward(self, x, mode="train", rng=None):
        axes, bshape = self._axes_and_bshape(x.ndim)
        if x.shape[-1] != self.num_features:
            raise ValueError(f"batchnorm expected {self.num_features} channels, got {x.shape[-1]}")
        if mode == "train":
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean[...] = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var[...] = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(bshape)) * inv_std.reshape(bshape)
        y = self.gamma.value.reshape(bshape) * xhat + self.beta.value.reshape(bshape)
        return y, (mode, xhat, inv_std, axes, bshape)

    def backward(self, cache, gy):
        mode, xhat, inv_std, axes, bshape = cache
        self.gamma.grad += (gy * xhat).sum(axis=axes)
        self.beta.grad += gy.sum(axis=axes)
        g = self.gamma.value.reshape(bshape) * inv_std.reshape(bshape)
        if mode != "train":
            return gy * g
        n_red = int(np.prod([xhat.shape[a] for a in axes]))
        sum_gy = gy.sum(axis=axes).reshape(bshape)
        sum_gy_xhat = (gy * xhat).sum(axis=axes).reshape(bshape)
        return (g / n_red) * (n_red * gy - sum_gy - xhat * sum_gy_xhat)


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, mode="train", rng=None):
        mask = x > 0
        return x * mask, mask

    def backward(self, cache, gy):
        return gy * cache


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, negative_slope: float = 0.2):
        self.negative_slope = negative_slope

    def forward(self, x, mode="train", rng=None):
        mask = x > 0
        return np.where(mask, x, self.negative_slope * x), mask

    def backward(self, cache, gy):
        return np.where(cache, gy, self.negative_slope * gy)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, mode="train", rng=None):
        y = 1.0 / (1.0 + np.exp(-x))
        return y, y

    def backward(self, cache, gy):
        return gy * cache * (1.0 - cache)


class Upsample2x(Layer):
    """Nearest-neighbor 2x spatial upsampling of (N, H, W, C)."""

    kind = "upsample2x"

    def forward(self, x, mode="train", rng=None):
        return x.repeat(2, axis=1).repeat(2, axis=2), x.shape

    def backward(self, cache, gy):
        n, h, w, c = cache
        return gy.reshape(n, h, 2, w, 2, c).sum(axis=(2, 4))


class MaxOverTime(Layer):
    """Per-channel maximum over the sequence axis: (N, L, C) -> (N, C)."""

    kind = "max_over_time"

    def forward(self, x, mode="train", rng=None):
        idx = x.argmax(axis=1)
        return np.take_along_axis(x, idx[:, None, :], axis=1)[:, 0, :], (x.shape, idx)

    def backward(self, cache, gy):
        x_shape, idx = cache
        gx = np.zeros(x_shape, dtype=gy.dtype)
        np.put_along_axis(gx, idx[:, None, :], gy[:, None, :], axis=1)
        return gx


class Dropout(Layer):
    """Inverted dropout; identity in eval mode."""

    kind = "dropout"

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, mode="train", rng=None):
        if mode != "train" or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in train mode needs an rng")
        keep = rng.random(x.shape) >= self.rate
        scale = 1.0 / (1.0 - self.rate)
        return x * keep * scale, (keep, scale)

    def backward(self, cache, gy):
        if cache is None:
            return gy
        keep, scale = cache
        return gy * keep * scale


class Reshape(Layer):
    """Reshape everything after the batch axis to a fixed tail shape."""

    kind = "reshape"

    def __init__(self, tail_shape: tuple[int, ...]):
        self.tail_shape = tuple(tail_shape)

    def forward(self, x, mode="train", rng=None):
        return x.reshape(x.shape[0], *self.tail_shape), x.shape

    def backward(self, cache, gy):
        return gy.reshape(cache)


class ResidualBlock(Layer):
    """Two same-shape 3x3 convs with batchnorm and a skip connection:
    y = relu(x + bn2(conv2(relu(bn1(conv1(x)))))).
    """

    kind = "residual_block"

    def __init__(self, channels: int, rng, dtype=np.float32):
        self.channels = channels
        self.conv1 = Conv2d(channels, channels, 3, rng, padding=1, dtype=dtype)
        self.bn1 = BatchNorm(channels, dtype=dtype)
        self.relu = ReLU()
        self.conv2 = Conv2d(channels, channels, 3, rng, padding=1, dtype=dtype)
        self.bn2 = BatchNorm(channels, dtype=dtype)

    def _children(self):
        return {"conv1": self.conv1, "bn1": self.bn1, "conv2": self.conv2, "bn2": self.bn2}

    def params(self):
        out = {}
        for cname, child in self._children().items():
            for pname, p in child.params().items():
                out[f"{cname}.{pname}"] = p
        return out

    def state(self):
        out = {}
        for cname, child in self._children().items():
            for sname, s in child.state().items():
                out[f"{cname}.{sname}"] = s
        return out

    def forward(self, x, mode="train", rng=None):
        h1, c1 = self.conv1.forward(x, mode, rng)
        h2, c2 = self.bn1.forward(h1, mode, rng)
        h3, c3 = self.relu.forward(h2, mode, rng)
        h4, c4 = self.conv2.forward(h3, mode, rng)
        h5, c5 = self.bn2.forward(h4, mode, rng)
        out_mask = (h5 + x) > 0
        return (h5 + x) * out_mask, (c1, c2, c3, c4, c5, out_mask)

    def backward(self, cache, gy):
        c1, c2, c3, c4, c5, out_mask = cache
        g = gy * out_mask
        gb = self.bn2.backward(c5, g)
        gb = self.conv2.backward(c4, gb)
        gb = self.relu.backward(c3, gb)
        gb = self.bn1.backward(c2, gb)
        gb = self.conv1.backward(c1, gb)
        return gb + g
