"""Minimal neural-network layers with exact reverse-mode gradients.

The network topology is fixed, so there is no autodiff graph: every layer
exposes forward(...) -> (output, cache) and backward(grad, cache) -> input
gradient, accumulating parameter gradients on the layer. Caches are
caller-held, which keeps concurrent forward passes safe as long as the
parameters are not being written.

Training runs in f64 (where gradients are finite-difference checked);
inference uses f32 copies of the same layers.
"""

from __future__ import annotations

import numpy as np


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    return dy * (y > 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form: saturates instead of overflowing, and stays on the fast
    # vectorized path (branchless; no divisions)
    out = np.tanh(0.5 * x)
    out += 1.0
    out *= 0.5
    return out


def apply_dropout(x: np.ndarray, keep: np.ndarray | None,
                  p_keep: float) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: scale kept units by 1/p_keep.

    keep is a {0,1} array broadcastable against x; None means dropout is
    disabled (deterministic mode, or p_keep == 1). Returns (y, scaled mask)
    where the scaled mask is also the backward multiplier.
    """
    if keep is None or p_keep >= 1.0:
        return x, None
    scaled = keep.astype(x.dtype) / x.dtype.type(p_keep)
    return x * scaled, scaled


class Dense:
    """Affine layer y = x W + b with Glorot-uniform init."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 dtype=np.float64):
        limit = np.sqrt(6.0 / (n_in + n_out))
        self.W = rng.uniform(-limit, limit, size=(n_in, n_out)).astype(dtype)
        self.b = np.zeros(n_out, dtype=dtype)
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)

    def parameters(self):
        return [("W", self.W, self.gW), ("b", self.b, self.gb)]

    def zero_grads(self):
        self.gW[...] = 0.0
        self.gb[...] = 0.0

    def forward(self, x: np.ndarray):
        return x @ self.W + self.b, x

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        x = cache
        self.gW += x.T @ dy
        self.gb += dy.sum(axis=0)
        return dy @ self.W.T


def _im2col_indices(c_in: int, h: int, w: int, k: int, stride: int, pad: int):
    h_out = (h + 2 * pad - k) // stride + 1
    w_out = (w + 2 * pad - k) // stride + 1
    i0 = np.repeat(np.arange(k), k)
    i0 = np.tile(i0, c_in)
    i1 = stride * np.repeat(np.arange(h_out), w_out)
    j0 = np.tile(np.arange(k), k * c_in)
    j1 = stride * np.tile(np.arange(w_out), h_out)
    i = i0[:, None] + i1[None, :]
    j = j0[:, None] + j1[None, :]
    ch = np.repeat(np.arange(c_in), k * k)[:, None]
    return ch, i, j, h_out, w_out


class Conv2d:
    """2-D convolution (NCHW) via im2col."""

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int,
                 pad: int, rng: np.random.Generator, dtype=np.float64):
        fan_in = c_in * kernel * kernel
        fan_out = c_out * kernel * kernel
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        self.W = rng.uniform(-limit, limit,
                             size=(c_out, c_in, kernel, kernel)).astype(dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self._idx_cache: dict = {}

    def parameters(self):
        return [("W", self.W, self.gW), ("b", self.b, self.gb)]

    def zero_grads(self):
        self.gW[...] = 0.0
        self.gb[...] = 0.0

    def _indices(self, c_in, h, w):
        key = (c_in, h, w)
        if key not in self._idx_cache:
            self._idx_cache[key] = _im2col_indices(
                c_in, h, w, self.kernel, self.stride, self.pad)
        return self._idx_cache[key]

    def out_shape(self, h: int, w: int) -> tuple[int, int]:
        h_out = (h + 2 * self.pad - self.kernel) // self.stride + 1
        w_out = (w + 2 * self.pad - self.kernel) // self.stride + 1
        return h_out, w_out

    def forward(self, x: np.ndarray):
        n, c_in, h, w = x.shape
        ch, i, j, h_out, w_out = self._indices(c_in, h, w)
        padded = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad),
                            (self.pad, self.pad)))
        cols = padded[:, ch, i, j]                       # (N, C*k*k, L)
        w_mat = self.W.reshape(self.W.shape[0], -1)      # (c_out, C*k*k)
        out = np.matmul(w_mat[None], cols)               # (N, c_out, L)
        out += self.b[None, :, None]
        out = out.reshape(n, -1, h_out, w_out)
        return out, (cols, x.shape)

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        cols, x_shape = cache
        n, c_in, h, w = x_shape
        ch, i, j, h_out, w_out = self._indices(c_in, h, w)
        dy_mat = dy.reshape(n, dy.shape[1], -1)          # (N, c_out, L)
        w_mat = self.W.reshape(self.W.shape[0], -1)

        self.gW += np.tensordot(dy_mat, cols,
                                axes=([0, 2], [0, 2])).reshape(self.W.shape)
        self.gb += dy_mat.sum(axis=(0, 2))

        dcols = np.matmul(w_mat.T[None], dy_mat)         # (N, C*k*k, L)
        dpadded = np.zeros((n, c_in, h + 2 * self.pad, w + 2 * self.pad),
                           dtype=dy.dtype)
        np.add.at(dpadded, (slice(None), ch, i, j), dcols)
        if self.pad:
            return dpadded[:, :, self.pad:-self.pad, self.pad:-self.pad]
        return dpadded


class LSTMCell:
    """Standard 4-gate LSTM cell, unrolled explicitly by the caller.

    Gate layout along the last weight axis is (input, forget, output,
    cell): the three sigmoid gates sit in one block so a single activation
    call covers them.
    """

    def __init__(self, n_in: int, n_hidden: int, rng: np.random.Generator,
                 dtype=np.float64):
        limit = np.sqrt(6.0 / (n_in + n_hidden))
        self.Wx = rng.uniform(-limit, limit,
                              size=(n_in, 4 * n_hidden)).astype(dtype)
        self.Wh = rng.uniform(-limit, limit,
                              size=(n_hidden, 4 * n_hidden)).astype(dtype)
        self.b = np.zeros(4 * n_hidden, dtype=dtype)
        self.gWx = np.zeros_like(self.Wx)
        self.gWh = np.zeros_like(self.Wh)
        self.gb = np.zeros_like(self.b)
        self.n_hidden = n_hidden

    def parameters(self):
        return [("Wx", self.Wx, self.gWx), ("Wh", self.Wh, self.gWh),
                ("b", self.b, self.gb)]

    def zero_grads(self):
        self.gWx[...] = 0.0
        self.gWh[...] = 0.0
        self.gb[...] = 0.0

    def step(self, x: np.ndarray, h: np.ndarray, c: np.ndarray):
        nh = self.n_hidden
        z = x @ self.Wx + h @ self.Wh + self.b
        gates = sigmoid(z[:, :3 * nh])
        i = gates[:, :nh]
        f = gates[:, nh:2 * nh]
        o = gates[:, 2 * nh:]
        g = np.tanh(z[:, 3 * nh:])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        cache = (x, h, c, i, f, g, o, tanh_c)
        return h_new, c_new, cache

    def backward_step(self, dh: np.ndarray, dc: np.ndarray, cache):
        """Gradients for one unrolled step; returns (dx, dh_prev, dc_prev)."""
        x, h, c, i, f, g, o, tanh_c = cache
        do = dh * tanh_c
        dc_total = dc + dh * o * (1.0 - tanh_c * tanh_c)
        di = dc_total * g
        df = dc_total * c
        dg = dc_total * i
        dc_prev = dc_total * f

        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            do * o * (1.0 - o),
            dg * (1.0 - g * g),
        ], axis=1)

        self.gWx += x.T @ dz
        self.gWh += h.T @ dz
        self.gb += dz.sum(axis=0)
        dx = dz @ self.Wx.T
        dh_prev = dz @ self.Wh.T
        return dx, dh_prev, dc_prev

    def forward_seq(self, xs: np.ndarray, h0: np.ndarray,
                    c0: np.ndarray | None = None, need_cache: bool = True):
        """Unroll over xs of shape (N, T, n_in); returns hs (N, T, n_hidden).

        The input projection runs as one batched matmul over all steps;
        only the recurrent chain stays sequential. need_cache=False skips
        the backward bookkeeping (inference path; large batches).
        """
        n, t_steps, n_in = xs.shape
        nh = self.n_hidden
        if c0 is None:
            c0 = np.zeros_like(h0)

        xw = (xs.reshape(n * t_steps, n_in) @ self.Wx) \
            .reshape(n, t_steps, 4 * nh)
        hs = np.empty((n, t_steps, nh), dtype=h0.dtype)
        if need_cache:
            h_prev = np.empty_like(hs)
            c_prev = np.empty_like(hs)
            gates_all = np.empty((n, t_steps, 3 * nh), dtype=h0.dtype)
            g_all = np.empty_like(hs)
            tanh_all = np.empty_like(hs)

        h, c = h0, c0
        z = np.empty((n, 4 * nh), dtype=h0.dtype)
        for t in range(t_steps):
            if need_cache:
                h_prev[:, t] = h
                c_prev[:, t] = c
            np.matmul(h, self.Wh, out=z)
            z += xw[:, t]
            z += self.b
            gates = sigmoid(z[:, :3 * nh])
            g = np.tanh(z[:, 3 * nh:])
            i = gates[:, :nh]
            f = gates[:, nh:2 * nh]
            o = gates[:, 2 * nh:]
            c = f * c
            c += i * g
            tanh_c = np.tanh(c)
            h = o * tanh_c
            hs[:, t] = h
            if need_cache:
                gates_all[:, t] = gates
                g_all[:, t] = g
                tanh_all[:, t] = tanh_c
        if not need_cache:
            return hs, None
        cache = (xs, h_prev, c_prev, gates_all, g_all, tanh_all)
        return hs, cache

    def backward_seq(self, dhs: np.ndarray, cache):
        """Backprop through time; dhs is (N, T, n_hidden) upstream grads.

        Returns (dxs, dh0, dc0). The recurrent chain runs stepwise but the
        weight gradients collapse into whole-sequence matmuls.
        """
        xs, h_prev, c_prev, gates, g_all, tanh_c = cache
        n, t_steps, nh = dhs.shape
        dz = np.empty((n, t_steps, 4 * nh), dtype=dhs.dtype)
        dh = np.zeros((n, nh), dtype=dhs.dtype)
        dc = np.zeros_like(dh)
        for t in reversed(range(t_steps)):
            i = gates[:, t, :nh]
            f = gates[:, t, nh:2 * nh]
            o = gates[:, t, 2 * nh:]
            g = g_all[:, t]
            tc = tanh_c[:, t]
            dh_t = dhs[:, t] + dh
            do = dh_t * tc
            dc_total = dc + dh_t * o * (1.0 - tc * tc)
            dz[:, t, :nh] = dc_total * g * i * (1.0 - i)
            dz[:, t, nh:2 * nh] = dc_total * c_prev[:, t] * f * (1.0 - f)
            dz[:, t, 2 * nh:3 * nh] = do * o * (1.0 - o)
            dz[:, t, 3 * nh:] = dc_total * i * (1.0 - g * g)
            dh = dz[:, t] @ self.Wh.T
            dc = dc_total * f

        dz_flat = dz.reshape(n * t_steps, 4 * nh)
        self.gWx += xs.reshape(n * t_steps, -1).T @ dz_flat
        self.gWh += h_prev.reshape(n * t_steps, nh).T @ dz_flat
        self.gb += dz_flat.sum(axis=0)
        dxs = (dz_flat @ self.Wx.T).reshape(n, t_steps, -1)
        return dxs, dh, dc
