"""Collision prediction network: three-part assembly and staged inference.

The network splits into a CNN branch over the depth image (the only part
carrying dropout), a combiner that fuses image features with the
(v, omega) state into the recurrent initial hidden state, and a
prediction part that unrolls an LSTM over the action sequence and emits a
per-step collision probability.

Splitting matters for speed: one depth image serves every ensemble
member, every sigma point and every primitive, so the CNN runs N_MC
times, the combiner N_MC*N_SIGMA times, and only the cheap recurrent part
runs over the full N_MC*N_SIGMA*N_MP batch.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn.layers import Conv2d, Dense, LSTMCell, apply_dropout, relu, relu_grad, sigmoid
from .sim.camera import DepthImage

_MAGIC = b"ORNN"
_VERSION = 1


class CheckpointError(ValueError):
    pass


class ShapeError(ValueError):
    def __init__(self, what: str, expected, actual):
        super().__init__(f"{what}: expected shape {expected}, got {actual}")


@dataclass(frozen=True)
class CpnConfig:
    rows: int = 24
    cols: int = 32
    conv_channels: tuple[int, ...] = (8, 16, 32)
    kernel: int = 3
    stride: int = 2
    pad: int = 1
    d_img: int = 64
    d_state: int = 16
    d_hidden: int = 32
    p_drop: float = 0.2

    def __post_init__(self):
        # checkpoints store p_drop as f32; keep the live value identical
        object.__setattr__(self, "p_drop", float(np.float32(self.p_drop)))

    @property
    def p_keep(self) -> float:
        return 1.0 - self.p_drop

    @classmethod
    def from_config(cls, cfg) -> "CpnConfig":
        return cls(
            rows=cfg.get_int("sim.image_rows"),
            cols=cfg.get_int("sim.image_cols"),
            conv_channels=tuple(int(c) for c in cfg.get_list("cpn.conv_channels")),
            d_img=cfg.get_int("cpn.d_img"),
            d_state=cfg.get_int("cpn.d_state"),
            d_hidden=cfg.get_int("cpn.d_hidden"),
            p_drop=cfg.get_float("cpn.p_drop"),
        )


@dataclass(frozen=True)
class DropoutMask:
    """Fixed Bernoulli keep pattern for each CNN dropout site.

    Regenerable from (seed, p_keep, site shapes); applied with 1/p_keep
    scaling so the expectation over masks matches the mask-free pass.
    """

    seed: int
    p_keep: float
    sites: tuple[np.ndarray, ...]


def make_dropout_mask(site_shapes: list[tuple[int, ...]], p_keep: float,
                      seed: int) -> DropoutMask:
    rng = np.random.default_rng(seed)
    sites = tuple((rng.random(shape) < p_keep).astype(np.uint8)
                  for shape in site_shapes)
    return DropoutMask(seed=int(seed), p_keep=float(p_keep), sites=sites)


class CpnModel:
    """All trainable layers, in checkpoint declaration order."""

    def __init__(self, cfg: CpnConfig, rng: np.random.Generator | None = None,
                 dtype=np.float64):
        if rng is None:
            rng = np.random.default_rng(0)
        self.cfg = cfg
        self.dtype = dtype

        self.convs = []
        c_in = 1
        h, w = cfg.rows, cfg.cols
        self._site_shapes: list[tuple[int, ...]] = []
        for c_out in cfg.conv_channels:
            conv = Conv2d(c_in, c_out, cfg.kernel, cfg.stride, cfg.pad, rng,
                          dtype=dtype)
            h, w = conv.out_shape(h, w)
            self._site_shapes.append((c_out, h, w))
            self.convs.append(conv)
            c_in = c_out
        self.flat_dim = c_in * h * w

        self.fc_img = Dense(self.flat_dim, cfg.d_img, rng, dtype=dtype)
        self.fc_state = Dense(2, cfg.d_state, rng, dtype=dtype)
        self.combiner = Dense(cfg.d_img + cfg.d_state, cfg.d_hidden, rng,
                              dtype=dtype)
        self.lstm = LSTMCell(2, cfg.d_hidden, rng, dtype=dtype)
        self.head = Dense(cfg.d_hidden, 1, rng, dtype=dtype)

    def layers(self):
        return [*self.convs, self.fc_img, self.fc_state, self.combiner,
                self.lstm, self.head]

    def zero_grads(self):
        for layer in self.layers():
            layer.zero_grads()

    def site_shapes(self) -> list[tuple[int, ...]]:
        return list(self._site_shapes)

    def new_mask(self, seed: int, p_keep: float | None = None) -> DropoutMask:
        if p_keep is None:
            p_keep = self.cfg.p_keep
        return make_dropout_mask(self._site_shapes, p_keep, seed)

    def cast(self, dtype) -> "CpnModel":
        """Copy of the model with parameters cast to dtype (f32 inference)."""
        out = CpnModel(self.cfg, np.random.default_rng(0), dtype=dtype)
        for src, dst in zip(self.layers(), out.layers()):
            for (_, p_src, _), (_, p_dst, _) in zip(src.parameters(),
                                                    dst.parameters()):
                p_dst[...] = p_src.astype(dtype)
        return out


def normalize_depth(img: DepthImage) -> np.ndarray:
    """CPN image input: depth / max_range with invalid pixels at 1.0."""
    out = img.depth.astype(np.float32) / np.float32(img.max_range)
    out[~img.valid] = 1.0
    return out[None, :, :]


# ---------- forward pieces ----------

def cnn_features(model: CpnModel, images: np.ndarray,
                 mask: DropoutMask | None = None,
                 train_rng: np.random.Generator | None = None):
    """CNN branch: images (B, 1, H, W) -> features (B, d_img).

    mask applies a fixed per-site pattern broadcast over the batch
    (mc-inference); train_rng draws fresh per-sample masks (training).
    With neither, dropout is disabled (deterministic mode). Returns
    (features, cache) where the cache feeds cnn_backward.
    """
    cfg = model.cfg
    if images.ndim != 4 or images.shape[1:] != (1, cfg.rows, cfg.cols):
        raise ShapeError("cnn input", (-1, 1, cfg.rows, cfg.cols), images.shape)
    if mask is not None and train_rng is not None:
        raise ValueError("fixed mask and train rng are mutually exclusive")

    x = images
    conv_caches = []
    for i, conv in enumerate(model.convs):
        z, c_cache = conv.forward(x)
        a = relu(z)
        if mask is not None:
            site = mask.sites[i][None]
            a, drop_scale = apply_dropout(a, site, mask.p_keep)
        elif train_rng is not None and cfg.p_drop > 0.0:
            site = (train_rng.random(a.shape) < cfg.p_keep).astype(np.uint8)
            a, drop_scale = apply_dropout(a, site, cfg.p_keep)
        else:
            drop_scale = None
        conv_caches.append((c_cache, a, drop_scale))
        x = a

    flat = x.reshape(x.shape[0], -1)
    z_img, fc_cache = model.fc_img.forward(flat)
    feats = relu(z_img)
    cache = (conv_caches, x.shape, fc_cache, feats)
    return feats, cache


def cnn_backward(model: CpnModel, dfeats: np.ndarray, cache) -> np.ndarray:
    conv_caches, x_shape, fc_cache, feats = cache
    dz = relu_grad(dfeats, feats)
    dflat = model.fc_img.backward(dz, fc_cache)
    dx = dflat.reshape(x_shape)
    for conv, (c_cache, a, drop_scale) in zip(reversed(model.convs),
                                              reversed(conv_caches)):
        if drop_scale is not None:
            dx = dx * drop_scale
        dx = relu_grad(dx, a)
        dx = conv.backward(dx, c_cache)
    return dx


def encode_state(model: CpnModel, states: np.ndarray):
    z, cache = model.fc_state.forward(states)
    enc = relu(z)
    return enc, (cache, enc)


def encode_state_backward(model: CpnModel, denc: np.ndarray, cache):
    fc_cache, enc = cache
    return model.fc_state.backward(relu_grad(denc, enc), fc_cache)


def combine(model: CpnModel, feats: np.ndarray, state_enc: np.ndarray):
    """Initial hidden state h0 from concatenated image and state features."""
    joint = np.concatenate([feats, state_enc], axis=1)
    h0, cache = model.combiner.forward(joint)
    return h0, cache


def combine_backward(model: CpnModel, dh0: np.ndarray, cache):
    djoint = model.combiner.backward(dh0, cache)
    d_img = model.cfg.d_img
    return djoint[:, :d_img], djoint[:, d_img:]


def predict_profile(model: CpnModel, h0: np.ndarray, actions: np.ndarray,
                    need_cache: bool = True):
    """Per-step collision probabilities from h0 and (B, H, 2) actions.

    Step i depends only on h0 and actions up to i. Cell memory starts at
    zero; the combiner initializes the hidden state only. need_cache=False
    skips backward bookkeeping on the inference path.
    """
    actions = actions.astype(h0.dtype, copy=False)
    hs, lstm_cache = model.lstm.forward_seq(actions, h0,
                                            need_cache=need_cache)
    n, t_steps, nh = hs.shape
    logits, head_cache = model.head.forward(hs.reshape(n * t_steps, nh))
    probs = sigmoid(logits).reshape(n, t_steps)
    if not need_cache:
        return probs, None
    cache = (lstm_cache, head_cache, probs, (n, t_steps, nh))
    return probs, cache


def predict_profile_backward(model: CpnModel, dprobs: np.ndarray, cache):
    lstm_cache, head_cache, probs, (n, t_steps, nh) = cache
    dlogits = (dprobs * probs * (1.0 - probs)).reshape(n * t_steps, 1)
    dhs = model.head.backward(dlogits, head_cache).reshape(n, t_steps, nh)
    dactions, dh0, _ = model.lstm.backward_seq(dhs, lstm_cache)
    return dactions, dh0


# ---------- end-to-end passes ----------

def forward_train(model: CpnModel, images, states, actions,
                  rng: np.random.Generator | None):
    """Training pass with per-sample dropout; returns (probs, caches)."""
    feats, cnn_cache = cnn_features(model, images, train_rng=rng)
    enc, enc_cache = encode_state(model, states)
    h0, comb_cache = combine(model, feats, enc)
    probs, pred_cache = predict_profile(model, h0, actions)
    return probs, (cnn_cache, enc_cache, comb_cache, pred_cache)


def backward_train(model: CpnModel, dprobs, caches):
    cnn_cache, enc_cache, comb_cache, pred_cache = caches
    _, dh0 = predict_profile_backward(model, dprobs, pred_cache)
    dfeats, denc = combine_backward(model, dh0, comb_cache)
    encode_state_backward(model, denc, enc_cache)
    cnn_backward(model, dfeats, cnn_cache)


def full_forward(model: CpnModel, image: np.ndarray, state: np.ndarray,
                 actions: np.ndarray, mask: DropoutMask | None) -> np.ndarray:
    """One end-to-end pass for a single (image, state, sequence) triple.

    This is the reference path that staged_inference must reproduce
    exactly; it is deliberately unbatched.
    """
    feats, _ = cnn_features(model, image[None].astype(model.dtype), mask=mask)
    enc, _ = encode_state(model, state[None].astype(model.dtype))
    h0, _ = combine(model, feats, enc)
    probs, _ = predict_profile(model, h0, actions[None], need_cache=False)
    return probs[0]


@dataclass
class StageTimings:
    cnn_ms: float = 0.0
    combiner_ms: float = 0.0
    prediction_ms: float = 0.0


def staged_inference(model: CpnModel, image: np.ndarray,
                     sigma_states: np.ndarray,
                     masks: list[DropoutMask | None],
                     actions: np.ndarray,
                     jobs: int = 1) -> tuple[np.ndarray, StageTimings]:
    """Batched three-stage evaluation over masks x sigma points x primitives.

    image is the normalized (1, H, W) input, sigma_states is (N_SIGMA, 2),
    actions is (N_MP, H, 2). Returns probabilities with shape
    (N_MC, N_SIGMA, N_MP, H), identical to running full_forward per triple.
    jobs > 1 splits the prediction-stage batch across a thread pool
    (parameters are read-only during inference).
    """
    dtype = model.dtype
    n_mc = len(masks)
    n_sigma = sigma_states.shape[0]
    n_mp, horizon, _ = actions.shape

    t0 = time.perf_counter()
    feats = np.empty((n_mc, model.cfg.d_img), dtype=dtype)
    img_batch = image[None].astype(dtype)
    for n, mask in enumerate(masks):
        f, _ = cnn_features(model, img_batch, mask=mask)
        feats[n] = f[0]
    t1 = time.perf_counter()

    enc, _ = encode_state(model, sigma_states.astype(dtype))
    feats_tiled = np.broadcast_to(
        feats[:, None, :], (n_mc, n_sigma, model.cfg.d_img))
    enc_tiled = np.broadcast_to(
        enc[None, :, :], (n_mc, n_sigma, model.cfg.d_state))
    joint = np.concatenate([feats_tiled, enc_tiled], axis=2)
    h0, _ = model.combiner.forward(joint.reshape(n_mc * n_sigma, -1))
    t2 = time.perf_counter()

    h0_full = np.broadcast_to(
        h0.reshape(n_mc, n_sigma, 1, -1),
        (n_mc, n_sigma, n_mp, model.cfg.d_hidden),
    ).reshape(-1, model.cfg.d_hidden)
    acts_full = np.broadcast_to(
        actions[None, None].astype(dtype),
        (n_mc, n_sigma, n_mp, horizon, 2),
    ).reshape(-1, horizon, 2)

    batch = h0_full.shape[0]
    if jobs > 1 and batch >= 2 * jobs:
        from concurrent.futures import ThreadPoolExecutor

        bounds = np.linspace(0, batch, jobs + 1, dtype=int)
        chunks = [(h0_full[a:b].copy(), acts_full[a:b].copy())
                  for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(
                lambda hc: predict_profile(model, hc[0], hc[1],
                                           need_cache=False)[0], chunks))
        probs = np.concatenate(parts, axis=0)
    else:
        probs, _ = predict_profile(model, h0_full, acts_full,
                                   need_cache=False)
    t3 = time.perf_counter()

    timings = StageTimings(
        cnn_ms=(t1 - t0) * 1e3,
        combiner_ms=(t2 - t1) * 1e3,
        prediction_ms=(t3 - t2) * 1e3,
    )
    return probs.reshape(n_mc, n_sigma, n_mp, horizon), timings


# ---------- checkpoint format: magic ORNN, version u16, little-endian ----------

def save_model(model: CpnModel, path: str | Path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def model_to_bytes(model: CpnModel) -> bytes:
    cfg = model.cfg
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<H", _VERSION)
    out += struct.pack("<HH", cfg.rows, cfg.cols)
    out += struct.pack("<B", len(cfg.conv_channels))
    out += struct.pack(f"<{len(cfg.conv_channels)}H", *cfg.conv_channels)
    out += struct.pack("<BBB", cfg.kernel, cfg.stride, cfg.pad)
    out += struct.pack("<HHH", cfg.d_img, cfg.d_state, cfg.d_hidden)
    out += struct.pack("<f", cfg.p_drop)
    for layer in model.layers():
        for _, param, _ in layer.parameters():
            out += np.ascontiguousarray(param, dtype="<f4").tobytes()
    return bytes(out)


def load_model(path: str | Path, dtype=np.float64) -> CpnModel:
    return model_from_bytes(Path(path).read_bytes(), dtype=dtype)


def model_from_bytes(data: bytes, dtype=np.float64) -> CpnModel:
    pos = 0

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(data):
            raise CheckpointError("truncated checkpoint")
        vals = struct.unpack_from(fmt, data, pos)
        pos += size
        return vals

    if bytes(take("<4s")[0]) != _MAGIC:
        raise CheckpointError("bad magic, not an ORNN checkpoint")
    (version,) = take("<H")
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    rows, cols = take("<HH")
    (n_conv,) = take("<B")
    channels = take(f"<{n_conv}H")
    kernel, stride, pad = take("<BBB")
    d_img, d_state, d_hidden = take("<HHH")
    (p_drop,) = take("<f")

    cfg = CpnConfig(rows=rows, cols=cols, conv_channels=tuple(channels),
                    kernel=kernel, stride=stride, pad=pad, d_img=d_img,
                    d_state=d_state, d_hidden=d_hidden, p_drop=float(p_drop))
    model = CpnModel(cfg, np.random.default_rng(0), dtype=dtype)
    for layer in model.layers():
        for _, param, _ in layer.parameters():
            nbytes = param.size * 4
            if pos + nbytes > len(data):
                raise CheckpointError("truncated parameter blob")
            blob = np.frombuffer(data, dtype="<f4", count=param.size,
                                 offset=pos)
            param[...] = blob.reshape(param.shape).astype(dtype)
            pos += nbytes
    if pos != len(data):
        raise CheckpointError("trailing bytes after parameter blobs")
    return model
