"""Seeded training loop and the three-mode evaluation protocol.

Everything downstream of the config seed is deterministic: one generator
drives shuffling, augmentation, input dropout and regularization masks in
a fixed order, so a rerun of `train` is reproducible bit-exactly and the
metrics log can be compared as text.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .augment import augment, input_dropout
from .checkpoint import init_from_single_input, load_model, save_model
from .config import ModelConfig
from .data import load_image, read_sample_manifest
from .errors import InputError
from .fusion import CropPair, FaceBodyModel
from .losses import AgeNormalizer, LdsWeights, combined_loss, gender_loss, weighted_mse
from .metrics import metrics_report
from .optim import AdamW, warmup_lr
from .preprocess import prepare_crop
from .tensor import Tape
from .volo import TrainContext

GENDER_INDEX = {"male": 0, "female": 1}
EVAL_MODES = ("face", "body", "both")


@dataclass
class TrainResult:
    checkpoint_path: str
    metrics_path: str
    steps: int
    losses: List[float] = field(default_factory=list)
    log_lines: List[str] = field(default_factory=list)


class _ImageCache:
    """Desk-scale datasets fit in memory; load each file once."""

    def __init__(self, root):
        self.root = root
        self._cache = {}

    def get(self, name):
        if name not in self._cache:
            path = name if os.path.isabs(name) else os.path.join(self.root, name)
            self._cache[name] = load_image(path)
        return self._cache[name]


def _validate_ages(records, config):
    for r in records:
        if not (config.y_min <= r.age <= config.y_max):
            raise InputError(f"{r.image}: age {r.age} outside [{config.y_min}, {config.y_max}]")


def _batch_arrays(pairs, side):
    faces = np.stack([p.as_arrays(side)[0] for p in pairs])
    bodies = np.stack([p.as_arrays(side)[1] for p in pairs])
    return faces, bodies


def train(manifest_path, config: ModelConfig, out_dir, init_from=None):
    """Full loop: augment -> input dropout -> forward -> loss -> backward ->
    optimizer step, with warmup. Writes checkpoint + metrics log."""
    os.makedirs(out_dir, exist_ok=True)
    records = read_sample_manifest(manifest_path)
    _validate_ages(records, config)

    if init_from is not None:
        model = init_from_single_input(init_from, config)
    else:
        model = FaceBodyModel(config)

    normalizer = AgeNormalizer.from_config(config)
    lds = LdsWeights(
        [r.age for r in records],
        bin_width=config.lds_bin_width,
        kernel_size=config.lds_kernel_size,
        sigma=config.lds_sigma,
    )
    optimizer = AdamW(model.params, config, frozen=model.frozen)
    rng = np.random.default_rng(config.seed)
    images = _ImageCache(os.path.dirname(os.path.abspath(manifest_path)))

    n = len(records)
    batch = min(config.batch_size, n)
    steps_per_epoch = max(1, n // batch)
    total_steps = config.max_steps or config.epochs * steps_per_epoch

    losses = []
    log_lines = []
    order = []
    step = 0
    while step < total_steps:
        if len(order) < batch:
            order = list(rng.permutation(n))
        picked = [records[order.pop()] for _ in range(batch)]

        pairs = []
        targets = []
        labels = []
        weights = []
        for rec in picked:
            pair = augment(rec, images.get(rec.image), rng, config)
            pair = input_dropout(pair, rng, config)
            pairs.append(pair)
            targets.append(normalizer.normalize(rec.age))
            labels.append(GENDER_INDEX[rec.gender])
            weights.append(lds.weight_for(rec.age))

        faces, bodies = _batch_arrays(pairs, config.image_side)
        ctx = TrainContext(rng=rng, drop_rate=config.drop_rate, drop_path_rate=config.drop_path_rate)
        with Tape() as tape:
            logits, age_norm = model.forward_batch(faces, bodies, ctx=ctx)
            loss = combined_loss(
                weighted_mse(age_norm, np.array(targets), np.array(weights)),
                gender_loss(logits, labels),
                config.gender_loss_weight,
            )
            tape.backward(loss)

        lr = warmup_lr(step, config)
        optimizer.step(lr)
        model.zero_grads()

        loss_value = loss.item()
        losses.append(loss_value)
        if step % config.log_every == 0 or step == total_steps - 1:
            batch_mae = float(
                np.mean(np.abs(normalizer.denormalize(age_norm.data) - normalizer.denormalize(np.array(targets))))
            )
            log_lines.append(f"step {step} lr {lr!r} loss {loss_value!r} batch_age_mae {batch_mae!r}")
        step += 1

    checkpoint_path = os.path.join(out_dir, "model.ckpt")
    save_model(checkpoint_path, model)
    metrics_path = os.path.join(out_dir, "train_log.txt")
    with open(metrics_path, "w") as fh:
        fh.write("\n".join(log_lines) + "\n")
    return TrainResult(
        checkpoint_path=checkpoint_path,
        metrics_path=metrics_path,
        steps=total_steps,
        losses=losses,
        log_lines=log_lines,
    )


# ---------------------------------------------------------------------------
# evaluation


def _record_pair_for_mode(rec, image, mode, side):
    """Build the masked CropPair for one record, or None to skip it."""
    face = rec.face_bbox if mode in ("face", "both") else None
    body = rec.body_bbox if mode in ("body", "both") else None
    if mode == "face" and face is None:
        return None
    if mode == "body" and body is None:
        return None
    if mode == "both" and (rec.face_bbox is None or rec.body_bbox is None):
        return None
    return CropPair(
        face=prepare_crop(image, face, side) if face else None,
        body=prepare_crop(image, body, side) if body else None,
    )


def evaluate(manifest_path, model_or_checkpoint, mode="both"):
    """Metrics report for one evaluation mode.

    Modes mask the complementary input; records lacking a required side
    are skipped and counted, mirroring the three-column test protocol.
    Returns (report dict, skipped count).
    """
    if mode not in EVAL_MODES:
        raise InputError(f"unknown eval mode {mode!r} (want face, body or both)")
    model = model_or_checkpoint
    if not isinstance(model, FaceBodyModel):
        model = load_model(model_or_checkpoint)
    config = model.config
    records = read_sample_manifest(manifest_path)
    _validate_ages(records, config)
    normalizer = AgeNormalizer.from_config(config)
    images = _ImageCache(os.path.dirname(os.path.abspath(manifest_path)))

    kept = []
    skipped = 0
    for rec in records:
        pair = _record_pair_for_mode(rec, images.get(rec.image), mode, config.image_side)
        if pair is None:
            skipped += 1
            continue
        kept.append((rec, pair))
    if not kept:
        raise InputError(f"no records usable in mode {mode!r}")

    # single-side modes can take the skip path for the absent embedding
    skip = {"face": "body", "body": "face", "both": None}[mode]
    pred_years = []
    pred_gender = []
    for start in range(0, len(kept), config.batch_size):
        chunk = [pair for _, pair in kept[start:start + config.batch_size]]
        faces, bodies = _batch_arrays(chunk, config.image_side)
        logits, age_norm = model.forward_batch(faces, bodies, skip=skip)
        pred_years.extend(normalizer.denormalize(age_norm.data).tolist())
        pred_gender.extend("male" if row[0] >= row[1] else "female" for row in logits.data)

    target_years = [rec.age for rec, _ in kept]
    target_gender = [rec.gender for rec, _ in kept]
    report = {"mode": mode, "skipped": skipped}
    report.update(metrics_report(pred_years, target_years, pred_gender, target_gender))
    return report, skipped
