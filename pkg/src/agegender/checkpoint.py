"""Weight persistence: a textual manifest of parameter path -> shape ->
row-major values, with a versioned header carrying the full config and its
hashes. Values are written with repr so the round-trip is bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

from .config import ModelConfig
from .errors import InputError
from .fusion import FaceBodyModel
from .tensor import Tensor

FORMAT = "agegender-weights/1"


def save_checkpoint(path, params, config, frozen=()):
    header = {
        "format": FORMAT,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "arch_hash": config.arch_hash(),
        "frozen": sorted(frozen),
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for name in sorted(params):
            p = params[name]
            dims = ",".join(str(d) for d in p.shape)
            values = " ".join(repr(v) for v in p.data.reshape(-1).tolist())
            fh.write(f"{name}\t{dims}\t{values}\n")


def load_checkpoint(path):
    """Returns (arrays {name: ndarray}, config, frozen set)."""
    with open(path) as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: bad checkpoint header: {exc}") from exc
        if header.get("format") != FORMAT:
            raise InputError(f"{path}: unknown checkpoint format {header.get('format')!r}")
        config = ModelConfig.from_dict(header["config"])
        if config.config_hash() != header.get("config_hash"):
            raise InputError(f"{path}: config hash mismatch (corrupt or edited header)")
        arrays = {}
        for line_no, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                name, dims, values = line.split("\t")
                shape = tuple(int(d) for d in dims.split(",")) if dims else ()
                flat = np.array([float(v) for v in values.split(" ")])
            except ValueError as exc:
                raise InputError(f"{path}:{line_no}: bad parameter line") from exc
            expected = int(np.prod(shape)) if shape else 1
            if flat.size != expected:
                raise InputError(f"{path}:{line_no}: {name}: {flat.size} values for shape {shape}")
            arrays[name] = flat.reshape(shape)
    return arrays, config, set(header.get("frozen", []))


def save_model(path, model: FaceBodyModel):
    save_checkpoint(path, model.params, model.config, model.frozen)


def load_model(path):
    """Rebuild a model from a checkpoint; structure must match exactly."""
    arrays, config, frozen = load_checkpoint(path)
    model = FaceBodyModel(config)
    if set(arrays) != set(model.params):
        missing = sorted(set(model.params) - set(arrays))
        extra = sorted(set(arrays) - set(model.params))
        raise InputError(f"{path}: parameter set mismatch (missing {missing[:3]}, extra {extra[:3]})")
    for name, arr in arrays.items():
        if arr.shape != model.params[name].shape:
            raise InputError(f"{path}: {name}: shape {arr.shape} != {model.params[name].shape}")
        model.params[name] = Tensor(arr, requires_grad=True)
    for name in frozen:
        model.params[name].requires_grad = False
    model.frozen = frozen
    model._zero_token_cache.clear()
    return model


def init_from_single_input(face_checkpoint, config, enhancer_seed=None):
    """Warm-start the dual-input model from a single-input (face) run.

    The body patch embedding is copied from the face one, the trunk and
    head are copied, the feature enhancer is freshly random, and the face
    patch embedding is frozen (it is already trained).
    """
    arrays, src_config, _ = load_checkpoint(face_checkpoint)
    if src_config.arch_hash() != config.arch_hash():
        raise InputError(
            f"{face_checkpoint}: architecture hash {src_config.arch_hash()} does not match "
            f"target config {config.arch_hash()}; refusing to transfer weights"
        )
    seed = config.seed if enhancer_seed is None else enhancer_seed
    model = FaceBodyModel(config, rng=np.random.default_rng(seed))
    for name in model.params:
        if name.startswith("enhancer."):
            continue  # keep the fresh random init
        if name.startswith("body_embed."):
            source = "face_embed." + name[len("body_embed."):]
        else:
            source = name
        if source not in arrays:
            raise InputError(f"{face_checkpoint}: missing parameter {source}")
        model.params[name] = Tensor(arrays[source], requires_grad=True)
    model.freeze("face_embed")
    model._zero_token_cache.clear()
    return model
