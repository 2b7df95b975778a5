"""VOLO-style trunk blocks over the tape engine.

Everything is functional: parameters live in a flat {path: Tensor} dict
and every forward takes (params, prefix, input). That keeps checkpointing,
freezing and finite-difference checks trivial, and matches the
pure-function concurrency story: concurrent readers of frozen weights are
safe as long as they use separate tapes.

Token grids are [B, H, W, C]; token sequences are [B, T, C].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError


@dataclass
class TrainContext:
    """Training-only stochasticity (dropout / stochastic depth)."""

    rng: np.random.Generator
    drop_rate: float = 0.0
    drop_path_rate: float = 0.0


def _dropout(x, ctx):
    if ctx is None or ctx.drop_rate <= 0.0:
        return x
    keep = 1.0 - ctx.drop_rate
    mask = (ctx.rng.random(x.shape) < keep) / keep
    return x * T.constant(mask)


def _drop_path(x, ctx):
    # per-sample residual-branch drop (stochastic depth)
    if ctx is None or ctx.drop_path_rate <= 0.0:
        return x
    keep = 1.0 - ctx.drop_path_rate
    shape = (x.shape[0],) + (1,) * (x.ndim - 1)
    mask = (ctx.rng.random(shape) < keep) / keep
    return x * T.constant(mask)


# ---------------------------------------------------------------------------
# parameter construction


def trunc_normal(rng, shape, std=0.02):
    """Normal(0, std) with resampling beyond 2 std."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out


def init_linear(params, name, rng, fan_in, fan_out):
    params[name + ".weight"] = T.parameter(trunc_normal(rng, (fan_in, fan_out)))
    params[name + ".bias"] = T.parameter(np.zeros(fan_out))


def init_norm(params, name, width):
    params[name + ".gamma"] = T.parameter(np.ones(width))
    params[name + ".beta"] = T.parameter(np.zeros(width))


def linear(params, name, x):
    # flatten leading dims so the matmul is one big GEMM instead of a
    # stack of small ones
    w = params[name + ".weight"]
    b = params[name + ".bias"]
    if x.ndim == 2:
        return x @ w + b
    lead = x.shape[:-1]
    flat = T.reshape(x, (-1, x.shape[-1]))
    return T.reshape(flat @ w + b, lead + (w.shape[1],))


def lnorm(params, name, x):
    return T.layer_norm(x, params[name + ".gamma"], params[name + ".beta"])


def _init_mlp(params, prefix, rng, width, ratio):
    init_linear(params, prefix + ".fc1", rng, width, ratio * width)
    init_linear(params, prefix + ".fc2", rng, ratio * width, width)


def _mlp(params, prefix, x, ctx):
    h = T.gelu(linear(params, prefix + ".fc1", x))
    h = _dropout(h, ctx)
    return linear(params, prefix + ".fc2", h)


# ---------------------------------------------------------------------------
# patch embedding


def init_patch_embed(params, prefix, rng, cfg):
    init_linear(params, prefix, rng, 3 * cfg.patch_size**2, cfg.stage1_width)


def patch_embed(params, prefix, images, cfg):
    """[B, H, W, 3] image batch -> [B, T, C] tokens, T = (H/p)*(W/p)."""
    b, h, w, _ = images.shape
    p = cfg.patch_size
    if h % p or w % p:
        raise DimensionError(f"image {h}x{w} not divisible by patch size {p}")
    cols = T.unfold(images, p, p, 0)  # [B, T, p*p, 3]
    cols = T.reshape(cols, (b, cols.shape[1], 3 * p * p))
    return linear(params, prefix, cols)


def zero_input_tokens(params, prefix, cfg, batch):
    """Token grid a zero image embeds to: the bias, tiled.

    Exactly what `patch_embed` produces on a zero image (0 @ W + b == b,
    bitwise), so the skip path can substitute it without running the
    projection.
    """
    bias = params[prefix + ".bias"].data
    t = cfg.token_count
    return T.constant(np.broadcast_to(bias, (batch, t, bias.shape[0])).copy())


# ---------------------------------------------------------------------------
# outlooker


def init_outlooker(params, prefix, rng, cfg):
    c = cfg.stage1_width
    k = cfg.outlook_window
    init_norm(params, prefix + ".norm1", c)
    init_linear(params, prefix + ".attn", rng, c, cfg.outlook_heads * k**4)
    init_linear(params, prefix + ".v", rng, c, c)
    init_linear(params, prefix + ".proj", rng, c, c)
    init_norm(params, prefix + ".norm2", c)
    _init_mlp(params, prefix + ".mlp", rng, c, cfg.mlp_ratio)


def outlooker_forward(params, prefix, x, cfg, ctx=None):
    """Local-window attention where the weights come straight from a linear
    projection of each center token (no query-key products), then MLP.
    Spatial shape is preserved.
    """
    b, h, w, c = x.shape
    k = cfg.outlook_window
    if h < k or w < k:
        raise ConfigError(f"outlook window {k} exceeds token grid {h}x{w}")
    heads = cfg.outlook_heads
    d = c // heads
    pad = (k - 1) // 2

    xn = lnorm(params, prefix + ".norm1", x)
    attn = linear(params, prefix + ".attn", xn)
    attn = T.reshape(attn, (b, h * w, heads, k * k, k * k))
    attn = T.softmax(attn, axis=-1)

    v = linear(params, prefix + ".v", xn)
    cols = T.unfold(v, k, 1, pad)  # [B, L, k*k, C]
    cols = T.reshape(cols, (b, h * w, k * k, heads, d))
    cols = T.transpose(cols, (0, 1, 3, 2, 4))  # [B, L, heads, k*k, d]

    out = attn @ cols  # [B, L, heads, k*k, d]
    out = T.transpose(out, (0, 1, 3, 2, 4))
    out = T.reshape(out, (b, h * w, k * k, c))
    grid = T.fold(out, (h, w), k, 1, pad)
    inv_counts = 1.0 / T.overlap_counts(h, w, k, 1, pad)
    grid = grid * T.constant(inv_counts[None, :, :, None])
    grid = linear(params, prefix + ".proj", grid)

    x = x + _drop_path(grid, ctx)
    x = x + _drop_path(_mlp(params, prefix + ".mlp", lnorm(params, prefix + ".norm2", x), ctx), ctx)
    return x


# ---------------------------------------------------------------------------
# downsampling


def init_downsample(params, prefix, rng, cfg):
    c = cfg.stage1_width
    init_linear(params, prefix, rng, 4 * c, 2 * c)


def downsample_forward(params, prefix, x):
    """2x2 patch merge via linear projection: [B,h,w,C] -> [B,h/2,w/2,2C]."""
    b, h, w, c = x.shape
    if h % 2 or w % 2:
        raise DimensionError(f"downsample needs even dims, got {h}x{w}")
    cols = T.unfold(x, 2, 2, 0)  # [B, h/2*w/2, 4, C]
    cols = T.reshape(cols, (b, (h // 2) * (w // 2), 4 * c))
    out = linear(params, prefix, cols)
    return T.reshape(out, (b, h // 2, w // 2, 2 * c))


# ---------------------------------------------------------------------------
# transformer


def init_transformer(params, prefix, rng, cfg):
    d = cfg.stage2_width
    init_norm(params, prefix + ".norm1", d)
    init_linear(params, prefix + ".qkv", rng, d, 3 * d)
    init_linear(params, prefix + ".proj", rng, d, d)
    init_norm(params, prefix + ".norm2", d)
    _init_mlp(params, prefix + ".mlp", rng, d, cfg.mlp_ratio)


def transformer_forward(params, prefix, x, cfg, ctx=None):
    b, t, width = x.shape
    heads = cfg.attn_heads
    hd = width // heads

    xn = lnorm(params, prefix + ".norm1", x)
    qkv = linear(params, prefix + ".qkv", xn)  # [B, T, 3*width]
    qkv = T.reshape(qkv, (b, t, 3, heads, hd))
    qkv = T.transpose(qkv, (2, 0, 3, 1, 4))  # [3, B, heads, T, hd]
    q = T.reshape(T.narrow(qkv, 0, 0, 1), (b, heads, t, hd))
    k = T.reshape(T.narrow(qkv, 0, 1, 1), (b, heads, t, hd))
    v = T.reshape(T.narrow(qkv, 0, 2, 1), (b, heads, t, hd))

    att = T.softmax((q @ T.transpose(k, (0, 1, 3, 2))) * float(hd**-0.5), axis=-1)
    out = att @ v  # [B, heads, T, hd]
    out = T.reshape(T.transpose(out, (0, 2, 1, 3)), (b, t, width))
    out = linear(params, prefix + ".proj", out)

    x = x + _drop_path(out, ctx)
    x = x + _drop_path(_mlp(params, prefix + ".mlp", lnorm(params, prefix + ".norm2", x), ctx), ctx)
    return x


# ---------------------------------------------------------------------------
# head


def init_head(params, prefix, rng, cfg):
    init_linear(params, prefix + ".fc1", rng, cfg.stage2_width, cfg.head_hidden)
    init_linear(params, prefix + ".fc2", rng, cfg.head_hidden, 3)


def head_forward(params, prefix, tokens, cfg, ctx=None):
    """Pool tokens, two linear layers -> one 3-vector per sample.

    Single joint head: [0:2] gender logits, [2] normalized age (left
    unbounded here; clamping happens at denormalization).
    """
    if tokens.shape[1] == 0:
        raise DimensionError("head needs a non-empty token set")
    pooled = tokens.mean(axis=1)  # mean pooling; see config.pool
    hidden = _dropout(T.gelu(linear(params, prefix + ".fc1", pooled)), ctx)
    out = linear(params, prefix + ".fc2", hidden)  # [B, 3]
    gender_logits = T.narrow(out, 1, 0, 2)
    age_norm = T.reshape(T.narrow(out, 1, 2, 1), (tokens.shape[0],))
    return gender_logits, age_norm


# ---------------------------------------------------------------------------
# trunk assembly


def init_trunk(params, rng, cfg):
    for i in range(cfg.outlooker_blocks):
        init_outlooker(params, f"trunk.outlooker{i}", rng, cfg)
    init_downsample(params, "trunk.downsample", rng, cfg)
    for i in range(cfg.transformer_blocks):
        init_transformer(params, f"trunk.transformer{i}", rng, cfg)
    init_norm(params, "trunk.norm", cfg.stage2_width)
    init_head(params, "head", rng, cfg)


def trunk_forward(params, grid, cfg, ctx=None):
    """Outlooker stage -> downsample -> transformer stage -> final norm."""
    for i in range(cfg.outlooker_blocks):
        grid = outlooker_forward(params, f"trunk.outlooker{i}", grid, cfg, ctx)
    grid = downsample_forward(params, "trunk.downsample", grid)
    b, h, w, d = grid.shape
    x = T.reshape(grid, (b, h * w, d))
    for i in range(cfg.transformer_blocks):
        x = transformer_forward(params, f"trunk.transformer{i}", x, cfg, ctx)
    return lnorm(params, "trunk.norm", x)
