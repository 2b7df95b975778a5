"""Cross-view feature fusion and the dual-input model.

A :class:`CropPair` is the unit of inference: a face crop, a body crop, or
both. An absent side is by convention the zero image, so flagging a side
absent and feeding explicit zeros are bitwise-identical, and the skip path
can substitute the precomputed zero-input embedding without running the
projection.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .config import ModelConfig
from .errors import DimensionError, InputError
from .volo import (
    head_forward,
    init_linear,
    init_norm,
    init_patch_embed,
    init_trunk,
    linear,
    lnorm,
    patch_embed,
    trunk_forward,
    zero_input_tokens,
)


@dataclass
class CropPair:
    """Preprocessed (face, body) input pair; either side may be absent."""

    face: Optional[np.ndarray] = None  # [3, S, S] normalized crop
    body: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.face is None and self.body is None:
            raise InputError("a crop pair needs at least one of face/body")

    @property
    def face_present(self):
        return self.face is not None

    @property
    def body_present(self):
        return self.body is not None

    def as_arrays(self, side):
        """(face, body) arrays with the zero image standing in for absence."""
        zero = np.zeros((3, side, side))
        face = self.face if self.face_present else zero
        body = self.body if self.body_present else zero
        return np.asarray(face, dtype=np.float64), np.asarray(body, dtype=np.float64)


# ---------------------------------------------------------------------------
# feature enhancer


def init_enhancer(params, rng, cfg):
    c = cfg.stage1_width
    directions = ["enhancer.face_from_body"]
    if cfg.enhancer_bidirectional:
        directions.append("enhancer.body_from_face")
    for prefix in directions:
        init_norm(params, prefix + ".norm_q", c)
        init_norm(params, prefix + ".norm_kv", c)
        for name in ("q", "k", "v", "proj"):
            init_linear(params, f"{prefix}.{name}", rng, c, c)
    init_norm(params, "enhancer.fuse.norm", 2 * c)
    init_linear(params, "enhancer.fuse.fc1", rng, 2 * c, 2 * c)
    init_linear(params, "enhancer.fuse.fc2", rng, 2 * c, c)


def cross_attention_unit(params, prefix, q_tokens, kv_tokens, cfg):
    """Residual multi-head cross-attention: queries from one view, keys and
    values from the other. Pre-norm on both views."""
    b, t, c = q_tokens.shape
    heads = cfg.enhancer_heads
    hd = c // heads

    qn = lnorm(params, prefix + ".norm_q", q_tokens)
    kn = lnorm(params, prefix + ".norm_kv", kv_tokens)

    def to_heads(x):
        return T.transpose(T.reshape(x, (b, t, heads, hd)), (0, 2, 1, 3))

    q = to_heads(linear(params, prefix + ".q", qn))
    k = to_heads(linear(params, prefix + ".k", kn))
    v = to_heads(linear(params, prefix + ".v", kn))

    att = T.softmax((q @ T.transpose(k, (0, 1, 3, 2))) * float(hd**-0.5), axis=-1)
    out = T.reshape(T.transpose(att @ v, (0, 2, 1, 3)), (b, t, c))
    return q_tokens + linear(params, prefix + ".proj", out)


def enhance(params, face_tokens, body_tokens, cfg):
    """Cross-enrich both views, concatenate (2C) and fuse back down to C."""
    if face_tokens.shape != body_tokens.shape:
        raise DimensionError(
            f"enhance: face {face_tokens.shape} and body {body_tokens.shape} must match"
        )
    f = cross_attention_unit(params, "enhancer.face_from_body", face_tokens, body_tokens, cfg)
    if cfg.enhancer_bidirectional:
        b = cross_attention_unit(params, "enhancer.body_from_face", body_tokens, face_tokens, cfg)
    else:
        b = body_tokens
    cat = T.concat([f, b], axis=-1)  # [B, T, 2C]
    h = T.gelu(linear(params, "enhancer.fuse.fc1", lnorm(params, "enhancer.fuse.norm", cat)))
    return linear(params, "enhancer.fuse.fc2", h)  # [B, T, C]


# ---------------------------------------------------------------------------
# full model


class FaceBodyModel:
    """Dual-input age & gender estimator.

    Two patch embeddings (separate face/body parameter sets) feed the
    feature enhancer, whose fused token grid runs through the VOLO-style
    trunk into the single joint 3-vector head.
    """

    def __init__(self, config: ModelConfig, rng=None):
        self.config = config
        rng = np.random.default_rng(config.seed) if rng is None else rng
        params = {}
        init_patch_embed(params, "face_embed", rng, config)
        init_patch_embed(params, "body_embed", rng, config)
        init_enhancer(params, rng, config)
        init_trunk(params, rng, config)
        self.params = params
        self.frozen = set()
        self._zero_token_cache = {}

    # -- parameter bookkeeping ------------------------------------------------

    def freeze(self, prefix):
        """Freeze every parameter whose path starts with `prefix`."""
        hits = [name for name in self.params if name.startswith(prefix)]
        if not hits:
            raise InputError(f"no parameters under {prefix!r}")
        for name in hits:
            self.params[name].requires_grad = False
            self.params[name].grad = None
            self.frozen.add(name)

    def zero_grads(self):
        for p in self.params.values():
            p.grad = None

    def parameter_count(self):
        return sum(p.size for p in self.params.values())

    # -- forward ---------------------------------------------------------------

    def _zero_tokens(self, side, batch):
        """Bias-only token grid, cached per weight version."""
        prefix = f"{side}_embed"
        bias = self.params[prefix + ".bias"].data
        version = hashlib.sha256(bias.tobytes()).hexdigest()[:16]
        key = (side, version, batch)
        hit = self._zero_token_cache.get(key)
        if hit is None:
            hit = zero_input_tokens(self.params, prefix, self.config, batch).data
            self._zero_token_cache[key] = hit
        return T.constant(hit)

    def forward_batch(self, faces, bodies, ctx=None, skip=None):
        """Run a batch of (face, body) image pairs.

        faces/bodies: [B, 3, S, S] arrays (zero image where absent).
        skip: None, "face" or "body"; the named side is known absent for
        the whole batch and its embedding is substituted by the cached
        zero-input tokens instead of running the projection.

        Returns (gender_logits [B, 2], age_norm [B]) tensors.
        """
        cfg = self.config
        batch = faces.shape[0] if skip != "face" else bodies.shape[0]
        if skip == "face":
            face_tokens = self._zero_tokens("face", batch)
        else:
            face_tokens = patch_embed(
                self.params, "face_embed", T.constant(np.transpose(faces, (0, 2, 3, 1))), cfg
            )
        if skip == "body":
            body_tokens = self._zero_tokens("body", batch)
        else:
            body_tokens = patch_embed(
                self.params, "body_embed", T.constant(np.transpose(bodies, (0, 2, 3, 1))), cfg
            )
        fused = enhance(self.params, face_tokens, body_tokens, cfg)
        g = cfg.grid_side
        grid = T.reshape(fused, (batch, g, g, cfg.stage1_width))
        tokens = trunk_forward(self.params, grid, cfg, ctx)
        return head_forward(self.params, "head", tokens, cfg, ctx)

    def forward_pair(self, pair: CropPair):
        """One pair -> (gender logits [2], normalized age scalar)."""
        face, body = pair.as_arrays(self.config.image_side)
        logits, age = self.forward_batch(face[None], body[None])
        return logits.data[0].copy(), float(age.data[0])

    def forward_pair_skip(self, pair: CropPair):
        """Like forward_pair, but substitutes the absent side's zero-input
        embedding without running its projection. Only applicable when
        exactly one side is absent."""
        if pair.face_present and pair.body_present:
            raise InputError("skip path inapplicable: both sides present")
        skip = "face" if not pair.face_present else "body"
        face, body = pair.as_arrays(self.config.image_side)
        logits, age = self.forward_batch(face[None], body[None], skip=skip)
        return logits.data[0].copy(), float(age.data[0])
