"""Layer vocabulary with hand-written forward and backward passes.

All layers work on batch-first arrays.  ``forward`` returns the output and
a cache; ``backward`` takes that cache and the output gradient and returns
the input gradient plus one gradient per parameter (in ``params`` order).
Shapes passed to ``out_shape`` exclude the batch axis.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit


class ConfigurationError(ValueError):
    """Architecture or input shape mismatch."""


def conv_out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(x, kernel, stride, padding, oh, ow):
    n, c, h, w = x.shape
    hp = max(h + 2 * padding, stride * (oh - 1) + kernel)
    wp = max(w + 2 * padding, stride * (ow - 1) + kernel)
    xp = np.zeros((n, c, hp, wp), dtype=x.dtype)
    xp[:, :, padding:padding + h, padding:padding + w] = x
    cols = np.empty((n, c, kernel, kernel, oh, ow), dtype=x.dtype)
    for i in range(kernel):
        for j in range(kernel):
            cols[:, :, i, j] = xp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride]
    return cols.reshape(n, c * kernel * kernel, oh * ow)


def _col2im(cols, shape, kernel, stride, padding, oh, ow):
    n, c, h, w = shape
    hp = max(h + 2 * padding, stride * (oh - 1) + kernel)
    wp = max(w + 2 * padding, stride * (ow - 1) + kernel)
    xp = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    cols = cols.reshape(n, c, kernel, kernel, oh, ow)
    for i in range(kernel):
        for j in range(kernel):
            xp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += cols[:, :, i, j]
    return xp[:, :, padding:padding + h, padding:padding + w]


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: list[np.ndarray] = []

    def out_shape(self, in_shape: tuple) -> tuple:
        return in_shape

    def init_params(self, rng: np.random.Generator, dtype) -> None:
        pass

    def spec(self) -> dict:
        return {"kind": self.kind}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, cache, dy):
        raise NotImplementedError


class Linear(Layer):
    kind = "linear"

    def __init__(self, fan_in: int, fan_out: int):
        super().__init__()
        self.fan_in, self.fan_out = fan_in, fan_out

    def out_shape(self, in_shape):
        if in_shape != (self.fan_in,):
            raise ConfigurationError(f"linear expects ({self.fan_in},), got {in_shape}")
        return (self.fan_out,)

    def init_params(self, rng, dtype):
        w = rng.standard_normal((self.fan_out, self.fan_in)) / np.sqrt(self.fan_in)
        self.params = [w.astype(dtype), np.zeros(self.fan_out, dtype=dtype)]

    def spec(self):
        return {"kind": self.kind, "fan_in": self.fan_in, "fan_out": self.fan_out}

    def forward(self, x):
        w, b = self.params
        return x @ w.T + b, x

    def backward(self, x, dy):
        w, _ = self.params
        return dy @ w, [dy.T @ x, dy.sum(axis=0)]


class Conv2d(Layer):
    kind = "conv"

    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3, stride: int = 2, padding: int = 1):
        super().__init__()
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel, self.stride, self.padding = kernel, stride, padding

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise ConfigurationError(f"conv expects ({self.in_channels}, H, W), got {in_shape}")
        _, h, w = in_shape
        oh = conv_out_size(h, self.kernel, self.stride, self.padding)
        ow = conv_out_size(w, self.kernel, self.stride, self.padding)
        if oh < 1 or ow < 1:
            raise ConfigurationError(f"conv output would be empty for input {in_shape}")
        return (self.out_channels, oh, ow)

    def init_params(self, rng, dtype):
        fan_in = self.in_channels * self.kernel ** 2
        w = rng.standard_normal((self.out_channels, self.in_channels, self.kernel, self.kernel))
        self.params = [(w / np.sqrt(fan_in)).astype(dtype), np.zeros(self.out_channels, dtype=dtype)]

    def spec(self):
        return {"kind": self.kind, "in_channels": self.in_channels, "out_channels": self.out_channels,
                "kernel": self.kernel, "stride": self.stride, "padding": self.padding}

    def forward(self, x):
        w, b = self.params
        n, _, h, wd = x.shape
        oh = conv_out_size(h, self.kernel, self.stride, self.padding)
        ow = conv_out_size(wd, self.kernel, self.stride, self.padding)
        cols = _im2col(x, self.kernel, self.stride, self.padding, oh, ow)
        y = np.matmul(w.reshape(self.out_channels, -1), cols) + b[:, None]
        return y.reshape(n, self.out_channels, oh, ow), (x.shape, cols)

    def backward(self, cache, dy):
        x_shape, cols = cache
        w, _ = self.params
        n, f, oh, ow = dy.shape
        dy = dy.reshape(n, f, oh * ow)
        dw = np.tensordot(dy, cols, axes=([0, 2], [0, 2])).reshape(w.shape)
        dcols = np.matmul(w.reshape(f, -1).T, dy)
        dx = _col2im(dcols, x_shape, self.kernel, self.stride, self.padding, oh, ow)
        return dx, [dw, dy.sum(axis=(0, 2))]


class ConvTranspose2d(Layer):
    kind = "conv_transpose"

    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3, stride: int = 2,
                 padding: int = 1, output_padding: int = 0):
        super().__init__()
        if not 0 <= output_padding < stride:
            raise ConfigurationError(f"output_padding {output_padding} must lie in [0, {stride})")
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel, self.stride, self.padding = kernel, stride, padding
        self.output_padding = output_padding

    def _size(self, n):
        return (n - 1) * self.stride - 2 * self.padding + self.kernel + self.output_padding

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise ConfigurationError(f"conv_transpose expects ({self.in_channels}, H, W), got {in_shape}")
        return (self.out_channels, self._size(in_shape[1]), self._size(in_shape[2]))

    def init_params(self, rng, dtype):
        fan_in = self.in_channels * (-(-self.kernel // self.stride)) ** 2
        w = rng.standard_normal((self.in_channels, self.out_channels, self.kernel, self.kernel))
        self.params = [(w / np.sqrt(fan_in)).astype(dtype), np.zeros(self.out_channels, dtype=dtype)]

    def spec(self):
        return {"kind": self.kind, "in_channels": self.in_channels, "out_channels": self.out_channels,
                "kernel": self.kernel, "stride": self.stride, "padding": self.padding,
                "output_padding": self.output_padding}

    def forward(self, x):
        w, b = self.params
        n, c, h, wd = x.shape
        xr = x.reshape(n, c, h * wd)
        cols = np.matmul(w.reshape(c, -1).T, xr)
        out_shape = (n, self.out_channels, self._size(h), self._size(wd))
        y = _col2im(cols, out_shape, self.kernel, self.stride, self.padding, h, wd)
        return y + b[None, :, None, None], (x.shape, xr)

    def backward(self, cache, dy):
        x_shape, xr = cache
        w, _ = self.params
        n, c, h, wd = x_shape
        dcols = _im2col(dy, self.kernel, self.stride, self.padding, h, wd)
        dw = np.tensordot(xr, dcols, axes=([0, 2], [0, 2])).reshape(w.shape)
        dx = np.matmul(w.reshape(c, -1), dcols).reshape(x_shape)
        return dx, [dw, dy.sum(axis=(0, 2, 3))]


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, slope: float = 0.2):
        super().__init__()
        self.slope = slope

    def spec(self):
        return {"kind": self.kind, "slope": self.slope}

    def forward(self, x):
        positive = x > 0
        return np.where(positive, x, x * x.dtype.type(self.slope)), positive

    def backward(self, positive, dy):
        return np.where(positive, dy, dy * dy.dtype.type(self.slope)), []


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x):
        y = expit(x)
        return y, y

    def backward(self, y, dy):
        return dy * y * (1 - y), []


class Flatten(Layer):
    kind = "flatten"

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, shape, dy):
        return dy.reshape(shape), []


class Reshape(Layer):
    kind = "reshape"

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(int(s) for s in shape)

    def out_shape(self, in_shape):
        if np.prod(in_shape) != np.prod(self.shape):
            raise ConfigurationError(f"cannot reshape {in_shape} to {self.shape}")
        return self.shape

    def spec(self):
        return {"kind": self.kind, "shape": list(self.shape)}

    def forward(self, x):
        return x.reshape((x.shape[0],) + self.shape), x.shape

    def backward(self, shape, dy):
        return dy.reshape(shape), []


LAYER_KINDS = {cls.kind: cls for cls in (Linear, Conv2d, ConvTranspose2d, LeakyReLU, Sigmoid, Flatten, Reshape)}


def layer_from_spec(spec: dict) -> Layer:
    spec = dict(spec)
    try:
        cls = LAYER_KINDS[spec.pop("kind")]
    except KeyError as exc:
        raise ConfigurationError(f"unknown layer kind {exc}") from None
    return cls(**spec)
