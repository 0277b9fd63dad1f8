"""Upsampling convolutional generator with hand-written reverse pass.

Tensors are channel-first without a batch axis: ``(C, n0, n1[, n2])``.
Each block is nearest-neighbour upsampling by 2, then two shape-preserving
3x3(x3) convolutions each followed by a PReLU (one slope per layer) and an
optional pixel-wise channel normalisation.  A final padding-free
convolution to one channel and an adaptive sigmoid produce values in
(0, 1), which are rescaled to (eps, 1) and centrally cropped to the grid.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .grid import Grid, ScalarField

PIXEL_NORM_EPS = 1e-8


class NetworkDivergence(FloatingPointError):
    """Non-finite parameters or activations."""


# -- layers -------------------------------------------------------------------

class Conv:
    kind = "conv"

    def __init__(self, c_in: int, c_out: int, ndim: int, k: int = 3, pad: int = 1):
        self.c_in, self.c_out, self.ndim, self.k, self.pad = c_in, c_out, ndim, k, pad
        self.weight = np.zeros((c_out, c_in) + (k,) * ndim)
        self.bias = np.zeros(c_out)

    @property
    def params(self):
        return [self.weight, self.bias]

    @property
    def fans(self):
        r = self.k**self.ndim
        return self.c_in * r, self.c_out * r

    def _windows(self, x):
        if self.pad:
            x = np.pad(x, [(0, 0)] + [(self.pad, self.pad)] * self.ndim)
        axes = tuple(range(1, self.ndim + 1))
        return sliding_window_view(x, (self.k,) * self.ndim, axis=axes)

    def forward(self, x):
        win = self._windows(x)  # (C_in, *out, *k)
        nd = self.ndim
        y = np.tensordot(self.weight, win,
                         axes=([1] + list(range(2, 2 + nd)), [0] + list(range(1 + nd, 1 + 2 * nd))))
        y += self.bias.reshape((-1,) + (1,) * nd)
        return y

    def backward(self, x, gy):
        nd = self.ndim
        win = self._windows(x)
        sp = list(range(1, 1 + nd))
        gw = np.tensordot(gy, win, axes=(sp, sp))
        gb = gy.sum(axis=tuple(sp))
        padded = tuple(n + 2 * self.pad for n in x.shape[1:])
        gxp = np.zeros((x.shape[0],) + padded)
        out = gy.shape[1:]
        for off in itertools.product(range(self.k), repeat=nd):
            w = self.weight[(slice(None), slice(None)) + off]
            sl = (slice(None),) + tuple(slice(o, o + n) for o, n in zip(off, out))
            gxp[sl] += np.tensordot(w, gy, axes=([0], [0]))
        if self.pad:
            gxp = gxp[(slice(None),) + (slice(self.pad, -self.pad),) * nd]
        return gxp, [gw, gb]


class Upsample:
    kind = "upsample"
    params: list = []

    def __init__(self, ndim: int, factor: int = 2):
        self.ndim, self.factor = ndim, factor

    def forward(self, x):
        for ax in range(1, self.ndim + 1):
            x = np.repeat(x, self.factor, axis=ax)
        return x

    def backward(self, x, gy):
        shape = [gy.shape[0]]
        for n in x.shape[1:]:
            shape += [n, self.factor]
        g = gy.reshape(shape).sum(axis=tuple(range(2, 2 * self.ndim + 1, 2)))
        return g, []


class PReLU:
    kind = "prelu"

    def __init__(self):
        self.slope = np.array([0.25])

    @property
    def params(self):
        return [self.slope]

    def forward(self, x):
        return np.maximum(x, 0.0) + self.slope[0] * np.minimum(x, 0.0)

    def backward(self, x, gy):
        neg = np.minimum(x, 0.0)
        gx = np.where(x > 0.0, gy, self.slope[0] * gy)
        return gx, [np.array([np.sum(gy * neg)])]


class PixelNorm:
    kind = "pixelnorm"
    params: list = []

    def forward(self, x):
        return x / np.sqrt(np.mean(x * x, axis=0, keepdims=True) + PIXEL_NORM_EPS)

    def backward(self, x, gy):
        c = x.shape[0]
        r = 1.0 / np.sqrt(np.mean(x * x, axis=0, keepdims=True) + PIXEL_NORM_EPS)
        dot = np.sum(gy * x, axis=0, keepdims=True)
        return gy * r - x * (r**3) * dot / c, []


class AdaptiveSigmoid:
    kind = "sigmoid"

    def __init__(self):
        self.slope = np.array([1.0])

    @property
    def params(self):
        return [self.slope]

    def forward(self, x):
        return 0.5 * (1.0 + np.tanh(0.5 * self.slope[0] * x))

    def backward(self, x, gy):
        s = self.forward(x)
        ds = gy * s * (1.0 - s)
        return ds * self.slope[0], [np.array([np.sum(ds * x)])]


# -- network ------------------------------------------------------------------

@dataclass
class NetworkGradient:
    grads: list

    def flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grads]) if self.grads else np.zeros(0)

    def norm(self) -> float:
        return float(math.sqrt(sum(float(np.sum(g * g)) for g in self.grads)))


@dataclass
class ForwardCache:
    inputs: list
    output: np.ndarray
    version: int


class GeneratorNetwork:
    """Generator mapping a fixed latent tensor to an indicator field."""

    def __init__(self, grid: Grid, latent_channels: int, latent_shape, blocks,
                 eps: float = 1e-5, pixel_norm: bool = False, seed: int = 0):
        nd = grid.ndim
        latent_shape = tuple(int(n) for n in latent_shape)
        if len(latent_shape) != nd:
            raise ValueError("latent spatial rank must match the grid")
        if not 0.0 < eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        self.grid, self.eps, self.pixel_norm, self.seed = grid, float(eps), bool(pixel_norm), int(seed)
        self.latent_channels, self.latent_shape = int(latent_channels), latent_shape
        self.blocks = [tuple(int(c) for c in b) for b in blocks]
        layers = []
        c = self.latent_channels
        for block in self.blocks:
            layers.append(Upsample(nd))
            for c_out in block:
                layers.append(Conv(c, c_out, nd, 3, 1))
                layers.append(PReLU())
                if pixel_norm:
                    layers.append(PixelNorm())
                c = c_out
        layers.append(Conv(c, 1, nd, 3, 0))
        layers.append(AdaptiveSigmoid())
        self.layers = layers
        out = tuple(n * 2 ** len(self.blocks) - 2 for n in latent_shape)
        if any(o < g for o, g in zip(out, grid.dims)):
            raise ValueError(f"network output {out} smaller than grid {grid.dims}")
        self.output_shape = out
        self.version = 0
        self.latent = np.zeros((self.latent_channels,) + latent_shape)
        glorot_init(self, seed)

    # builders
    @classmethod
    def full_scale_2d(cls, grid: Grid | None = None, eps=1e-5, pixel_norm=False, seed=0):
        from .grid import make_grid
        grid = grid or make_grid((252, 124), (0.1, 0.1 * 123 / 251))
        return cls(grid, 128, (8, 4), [(128, 128), (64, 64), (64, 64), (32, 32), (32, 32)],
                   eps, pixel_norm, seed)

    @classmethod
    def full_scale_3d(cls, grid: Grid | None = None, eps=1e-5, pixel_norm=True, seed=0):
        from .grid import make_grid
        grid = grid or make_grid((92, 92, 92), (0.1, 0.1, 0.1))
        return cls(grid, 256, (3, 3, 3), [(256, 256), (128, 128), (128, 128), (64, 64), (64, 64)],
                   eps, pixel_norm, seed)

    @classmethod
    def for_grid(cls, grid: Grid, channels=(32, 16, 16, 8), latent_channels=None,
                 eps=1e-5, pixel_norm=False, seed=0):
        """Smallest latent so that ``len(channels)`` doublings cover the grid."""
        nb = len(channels)
        latent = tuple(max(1, math.ceil((n + 2) / 2**nb)) for n in grid.dims)
        lc = latent_channels or channels[0]
        return cls(grid, lc, latent, [(c, c) for c in channels], eps, pixel_norm, seed)

    # parameters
    @property
    def params(self) -> list:
        return [p for layer in self.layers for p in layer.params]

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params))

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params:
            raise ValueError("flat parameter vector has wrong length")
        i = 0
        for p in self.params:
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size
        self.touch()

    def touch(self) -> None:
        """Mark parameters as modified (invalidates forward caches)."""
        self.version += 1

    def crop_slices(self):
        return tuple(slice((o - g) // 2, (o - g) // 2 + g)
                     for o, g in zip(self.output_shape, self.grid.dims))


def glorot_init(net: GeneratorNetwork, seed: int) -> GeneratorNetwork:
    rng = np.random.default_rng(seed)
    net.latent[...] = rng.standard_normal(net.latent.shape)
    for layer in net.layers:
        if isinstance(layer, Conv):
            fan_in, fan_out = layer.fans
            lim = math.sqrt(6.0 / (fan_in + fan_out))
            layer.weight[...] = rng.uniform(-lim, lim, layer.weight.shape)
            layer.bias[...] = 0.0
        elif isinstance(layer, PReLU):
            layer.slope[...] = 0.25
        elif isinstance(layer, AdaptiveSigmoid):
            layer.slope[...] = 1.0
    net.seed = int(seed)
    net.touch()
    return net


def network_forward(net: GeneratorNetwork):
    """Return ``(gamma_hat, cache)``."""
    for p in net.params:
        if not np.all(np.isfinite(p)):
            raise NetworkDivergence("non-finite network parameter")
    x = net.latent
    inputs = []
    for layer in net.layers:
        inputs.append(x)
        x = layer.forward(x)
    s = x[0]
    if not np.all(np.isfinite(s)):
        raise NetworkDivergence("non-finite network activation")
    gamma = net.eps + (1.0 - net.eps) * s[net.crop_slices()]
    return ScalarField(net.grid, gamma), ForwardCache(inputs, x, net.version)


def network_backward(net: GeneratorNetwork, cache: ForwardCache, upstream) -> NetworkGradient:
    """Gradient of ``<upstream, gamma_hat(theta)>`` with respect to all parameters."""
    if cache.version != net.version or len(cache.inputs) != len(net.layers):
        raise ValueError("forward cache does not match the current network state")
    up = upstream.values if isinstance(upstream, ScalarField) else np.asarray(upstream)
    if up.shape != net.grid.shape:
        raise ValueError("upstream shape does not match the grid")
    g = np.zeros_like(cache.output)
    g[(0,) + net.crop_slices()] = (1.0 - net.eps) * up
    grads = []
    for layer, x in zip(reversed(net.layers), reversed(cache.inputs)):
        g, pg = layer.backward(x, g)
        grads.append(pg)
    flat = [p for pg in reversed(grads) for p in pg]
    return NetworkGradient(flat)
