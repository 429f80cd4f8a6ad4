"""Spectrogram transformer for 3D contact position regression.

The 7-channel spectrogram tensor is cut into C x 16 x 16 patches at stride
10 over both time and frequency, linearly projected, prefixed with a class
token, and passed through pre-norm transformer encoder blocks (multi-head
self-attention, then a GELU MLP, each with a residual connection).  The
final layer-norm of the class token feeds a 3-output linear head predicting
the contact position in normalized workspace coordinates.

Everything is plain numpy in double precision.  ``backward`` implements the
exact analytic gradients of the MSE loss with respect to every parameter
tensor; the test-suite checks them against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf, ndtri

from .errors import NumericError

LN_EPS = 1e-6
TRUNC_SIGMA = 0.02


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 7
    kernel: int = 16
    stride: int = 10
    embed_dim: int = 64
    depth: int = 2
    heads: int = 4
    mlp_ratio: int = 4
    input_t: int = 61
    input_f: int = 65
    head_out: int = 3

    def __post_init__(self):
        if self.embed_dim % self.heads != 0:
            raise ValueError("embed_dim must be divisible by heads")
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.input_t < self.kernel or self.input_f < self.kernel:
            raise ValueError("input grid must be at least kernel x kernel")
        if min(self.channels, self.kernel, self.stride, self.mlp_ratio, self.head_out) < 1:
            raise ValueError("all size fields must be positive")

    @property
    def n_patches_t(self) -> int:
        return (self.input_t - self.kernel) // self.stride + 1

    @property
    def n_patches_f(self) -> int:
        return (self.input_f - self.kernel) // self.stride + 1

    @property
    def n_patches(self) -> int:
        return self.n_patches_t * self.n_patches_f

    @property
    def n_tokens(self) -> int:
        return self.n_patches + 1

    @property
    def patch_len(self) -> int:
        return self.channels * self.kernel * self.kernel

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    def to_dict(self) -> dict:
        return {"channels": self.channels, "kernel": self.kernel, "stride": self.stride,
                "embed_dim": self.embed_dim, "depth": self.depth, "heads": self.heads,
                "mlp_ratio": self.mlp_ratio, "input_t": self.input_t,
                "input_f": self.input_f, "head_out": self.head_out}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**{k: int(v) for k, v in data.items()})


@dataclass(frozen=True)
class TargetNorm:
    """Affine map between workspace mm and normalized [-1, 1] coordinates."""

    center_mm: np.ndarray
    half_extent_mm: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center_mm, dtype=np.float64).reshape(3)
        h = np.asarray(self.half_extent_mm, dtype=np.float64).reshape(3)
        if not np.all(h > 0):
            raise ValueError("half extents must be positive")
        object.__setattr__(self, "center_mm", c)
        object.__setattr__(self, "half_extent_mm", h)

    @classmethod
    def from_box(cls, box) -> "TargetNorm":
        return cls(box.center, box.half_extent)

    def normalize(self, position_mm: np.ndarray) -> np.ndarray:
        return (np.asarray(position_mm, dtype=np.float64) - self.center_mm) / self.half_extent_mm

    def denormalize(self, normalized: np.ndarray) -> np.ndarray:
        return np.asarray(normalized, dtype=np.float64) * self.half_extent_mm + self.center_mm

    def to_dict(self) -> dict:
        return {"center_mm": self.center_mm.tolist(),
                "half_extent_mm": self.half_extent_mm.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "TargetNorm":
        return cls(np.asarray(data["center_mm"]), np.asarray(data["half_extent_mm"]))


@dataclass
class Prediction:
    normalized: np.ndarray
    position_mm: np.ndarray


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: Dict[str, np.ndarray]
    target_norm: TargetNorm

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()},
                           self.target_norm)


def tensor_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Name and shape of every parameter tensor, in a fixed order."""
    d, r = config.embed_dim, config.mlp_ratio
    shapes: Dict[str, Tuple[int, ...]] = {
        "patch.w": (d, config.patch_len),
        "patch.b": (d,),
        "cls": (d,),
        "pos": (config.n_tokens, d),
    }
    for i in range(config.depth):
        p = f"block{i}."
        shapes[p + "ln1.g"] = (d,)
        shapes[p + "ln1.b"] = (d,)
        shapes[p + "attn.qkv.w"] = (3 * d, d)
        shapes[p + "attn.qkv.b"] = (3 * d,)
        shapes[p + "attn.out.w"] = (d, d)
        shapes[p + "attn.out.b"] = (d,)
        shapes[p + "ln2.g"] = (d,)
        shapes[p + "ln2.b"] = (d,)
        shapes[p + "mlp.fc1.w"] = (r * d, d)
        shapes[p + "mlp.fc1.b"] = (r * d,)
        shapes[p + "mlp.fc2.w"] = (d, r * d)
        shapes[p + "mlp.fc2.b"] = (d,)
    shapes["final_ln.g"] = (d,)
    shapes["final_ln.b"] = (d,)
    shapes["head.w"] = (config.head_out, d)
    shapes["head.b"] = (config.head_out,)
    return shapes


def param_count(config: ModelConfig) -> int:
    """Closed-form parameter count.

    patch D*(C*k^2)+D, class token D, positions (N_p+1)*D, per block
    4 layer-norm vectors (4D) + QKV (3D*D+3D) + attention out (D*D+D)
    + MLP (2*r*D*D + r*D + D), final norm 2D, head 3*D+3.
    """
    d, r, c, k = config.embed_dim, config.mlp_ratio, config.channels, config.kernel
    per_block = 4 * d + (3 * d * d + 3 * d) + (d * d + d) + (2 * r * d * d + r * d + d)
    return (d * (c * k * k) + d + d + config.n_tokens * d
            + config.depth * per_block + 2 * d
            + config.head_out * d + config.head_out)


def _truncated_normal(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    """Normal(0, sigma) truncated to +-2 sigma via inverse-CDF sampling."""
    lo, hi = 0.5 * (1.0 + erf(-2.0 / math.sqrt(2.0))), 0.5 * (1.0 + erf(2.0 / math.sqrt(2.0)))
    u = rng.uniform(lo, hi, size=shape)
    return sigma * ndtri(u)


def init_params(config: ModelConfig, rng_seed, target_norm: TargetNorm) -> ModelParams:
    """Deterministic initialization: truncated normal for projections and
    embeddings, zeros for biases, ones for layer-norm scales."""
    rng = np.random.default_rng(rng_seed)
    tensors: Dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(config).items():
        if name.endswith(".g"):
            tensors[name] = np.ones(shape)
        elif name.endswith(".b"):
            tensors[name] = np.zeros(shape)
        else:
            tensors[name] = _truncated_normal(rng, shape, TRUNC_SIGMA)
    return ModelParams(config, tensors, target_norm)


# --- forward pass ---


def extract_patches(x: np.ndarray, config: ModelConfig) -> np.ndarray:
    """(B, C, T, F) -> (B, N_p, C*k*k) patch matrix; validates the shape."""
    if x.ndim != 4 or x.shape[1:] != (config.channels, config.input_t, config.input_f):
        raise ValueError(f"expected (B, {config.channels}, {config.input_t}, "
                         f"{config.input_f}), got {x.shape}")
    k, s = config.kernel, config.stride
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s]
    # (B, C, n_t, n_f, k, k) -> (B, n_t, n_f, C, k, k) -> flatten patches
    win = win.transpose(0, 2, 3, 1, 4, 5)
    return win.reshape(x.shape[0], config.n_patches, config.patch_len)


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layer_norm_backward(dy: np.ndarray, g: np.ndarray, cache):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    m = dxhat.mean(axis=-1, keepdims=True)
    mx = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m - xhat * mx)
    return dx, dg, db


def _gelu(u: np.ndarray) -> np.ndarray:
    return 0.5 * u * (1.0 + erf(u / math.sqrt(2.0)))


def _gelu_grad(u: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(u / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    return cdf + u * pdf


def _flat(x: np.ndarray) -> np.ndarray:
    """Collapse (B, N, D) to (B*N, D) so weight gradients are single GEMMs."""
    return np.ascontiguousarray(x).reshape(-1, x.shape[-1])


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, n, d = x.shape
    return x.reshape(b, n, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, n, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)


def forward(params: ModelParams, x: np.ndarray, want_cache: bool = False):
    """Run the network on a (B, C, T, F) batch; returns (B, 3) normalized
    predictions (and the activation cache when requested for backward)."""
    cfg = params.config
    t = params.tensors
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    patches = extract_patches(x, cfg)
    b = patches.shape[0]
    tokens = patches @ t["patch.w"].T + t["patch.b"]
    cls = np.broadcast_to(t["cls"], (b, 1, cfg.embed_dim))
    h = np.concatenate([cls, tokens], axis=1) + t["pos"]

    cache = {"patches": patches, "blocks": []} if want_cache else None
    scale = 1.0 / math.sqrt(cfg.head_dim)
    for i in range(cfg.depth):
        p = f"block{i}."
        n1, ln1_cache = _layer_norm(h, t[p + "ln1.g"], t[p + "ln1.b"])
        qkv = n1 @ t[p + "attn.qkv.w"].T + t[p + "attn.qkv.b"]
        q, k, v = (_split_heads(a, cfg.heads) for a in np.split(qkv, 3, axis=-1))
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale
        scores -= scores.max(axis=-1, keepdims=True)
        attn = np.exp(scores)
        attn /= attn.sum(axis=-1, keepdims=True)
        ctx = _merge_heads(attn @ v)
        attn_out = ctx @ t[p + "attn.out.w"].T + t[p + "attn.out.b"]
        h_mid = h + attn_out

        n2, ln2_cache = _layer_norm(h_mid, t[p + "ln2.g"], t[p + "ln2.b"])
        u = n2 @ t[p + "mlp.fc1.w"].T + t[p + "mlp.fc1.b"]
        act = _gelu(u)
        mlp_out = act @ t[p + "mlp.fc2.w"].T + t[p + "mlp.fc2.b"]
        h_next = h_mid + mlp_out
        if want_cache:
            cache["blocks"].append({"ln1": ln1_cache, "n1": n1, "q": q, "k": k, "v": v,
                                    "attn": attn, "ctx": ctx, "ln2": ln2_cache,
                                    "n2": n2, "u": u, "act": act})
        h = h_next

    cls_final = h[:, 0, :]
    n_out, final_cache = _layer_norm(cls_final, t["final_ln.g"], t["final_ln.b"])
    preds = n_out @ t["head.w"].T + t["head.b"]
    if not np.all(np.isfinite(preds)):
        raise NumericError("non-finite activations in forward pass")
    if want_cache:
        cache["final_ln"] = final_cache
        cache["n_out"] = n_out
        return preds, cache
    return preds


def predict(params: ModelParams, x: np.ndarray) -> Prediction:
    """Forward plus denormalization into workspace mm."""
    single = np.asarray(x).ndim == 3
    norm = forward(params, x)
    pos = params.target_norm.denormalize(norm)
    if single:
        return Prediction(norm[0], pos[0])
    return Prediction(norm, pos)


def mse_loss(preds: np.ndarray, targets: np.ndarray) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {targets.shape}")
    diff = preds - targets
    return float(np.mean(diff * diff))


def backward(params: ModelParams, x: np.ndarray, targets: np.ndarray):
    """Loss and exact parameter gradients for one batch.

    Returns ``(loss, grads)`` where grads mirrors ``params.tensors``.
    """
    cfg = params.config
    t = params.tensors
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    targets = np.asarray(targets, dtype=np.float64).reshape(x.shape[0], cfg.head_out)
    preds, cache = forward(params, x, want_cache=True)
    diff = preds - targets
    loss = float(np.mean(diff * diff))
    grads = {name: np.zeros_like(tensor) for name, tensor in t.items()}

    dpreds = 2.0 * diff / diff.size
    grads["head.w"] = dpreds.T @ cache["n_out"]
    grads["head.b"] = dpreds.sum(axis=0)
    dn_out = dpreds @ t["head.w"]
    dcls, dg, db = _layer_norm_backward(dn_out, t["final_ln.g"], cache["final_ln"])
    grads["final_ln.g"] = dg
    grads["final_ln.b"] = db

    b, n, d = x.shape[0], cfg.n_tokens, cfg.embed_dim
    dh = np.zeros((b, n, d))
    dh[:, 0, :] = dcls
    scale = 1.0 / math.sqrt(cfg.head_dim)
    for i in range(cfg.depth - 1, -1, -1):
        p = f"block{i}."
        c = cache["blocks"][i]
        # MLP branch
        dmlp_out = dh
        grads[p + "mlp.fc2.w"] = _flat(dmlp_out).T @ _flat(c["act"])
        grads[p + "mlp.fc2.b"] = dmlp_out.sum(axis=(0, 1))
        dact = dmlp_out @ t[p + "mlp.fc2.w"]
        du = dact * _gelu_grad(c["u"])
        grads[p + "mlp.fc1.w"] = _flat(du).T @ _flat(c["n2"])
        grads[p + "mlp.fc1.b"] = du.sum(axis=(0, 1))
        dn2 = du @ t[p + "mlp.fc1.w"]
        dh_mid, dg, db = _layer_norm_backward(dn2, t[p + "ln2.g"], c["ln2"])
        grads[p + "ln2.g"] = dg
        grads[p + "ln2.b"] = db
        dh_mid = dh_mid + dh  # residual

        # attention branch
        dattn_out = dh_mid
        grads[p + "attn.out.w"] = _flat(dattn_out).T @ _flat(c["ctx"])
        grads[p + "attn.out.b"] = dattn_out.sum(axis=(0, 1))
        dctx = _split_heads(dattn_out @ t[p + "attn.out.w"], cfg.heads)
        dattn = dctx @ c["v"].transpose(0, 1, 3, 2)
        dv = c["attn"].transpose(0, 1, 3, 2) @ dctx
        dscores = c["attn"] * (dattn - (dattn * c["attn"]).sum(axis=-1, keepdims=True))
        dscores *= scale
        dq = dscores @ c["k"]
        dk = dscores.transpose(0, 1, 3, 2) @ c["q"]
        dqkv = np.concatenate([_merge_heads(dq), _merge_heads(dk), _merge_heads(dv)],
                              axis=-1)
        grads[p + "attn.qkv.w"] = _flat(dqkv).T @ _flat(c["n1"])
        grads[p + "attn.qkv.b"] = dqkv.sum(axis=(0, 1))
        dn1 = dqkv @ t[p + "attn.qkv.w"]
        dh_in, dg, db = _layer_norm_backward(dn1, t[p + "ln1.g"], c["ln1"])
        grads[p + "ln1.g"] = dg
        grads[p + "ln1.b"] = db
        dh = dh_in + dh_mid  # residual

    grads["pos"] = dh.sum(axis=0)
    grads["cls"] = dh[:, 0, :].sum(axis=0)
    dtokens = dh[:, 1:, :]
    grads["patch.w"] = _flat(dtokens).T @ _flat(cache["patches"])
    grads["patch.b"] = dtokens.sum(axis=(0, 1))

    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
    return loss, grads
