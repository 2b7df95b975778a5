"""Dataset I/O: portable-pixmap images, raw tensors, the newline-delimited
manifests every tool consumes, and the synthetic fixture generator.

Synthetic images let convergence be checked without any real data: mean
intensity encodes age (optionally split between the face and body regions)
and channel dominance encodes gender. A test fixture, nothing more.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError
from .pairing import BBox, Detection

GENDERS = ("male", "female")


# ---------------------------------------------------------------------------
# images


def write_ppm(path, image):
    """Binary P6, 8-bit; `image` is float [H, W, 3] in [0, 1]."""
    arr = np.clip(np.asarray(image), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    h, w = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


def read_ppm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P6"):
        raise InputError(f"{path}: not a binary PPM (P6) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":  # comment line
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise InputError(f"{path}: bad PPM header") from exc
    if maxval != 255:
        raise InputError(f"{path}: only maxval 255 is supported, got {maxval}")
    pixels = np.frombuffer(blob, dtype=np.uint8, count=w * h * 3, offset=pos)
    if pixels.size != w * h * 3:
        raise InputError(f"{path}: truncated pixel data")
    return pixels.reshape(h, w, 3).astype(np.float64) / 255.0


def load_image(path):
    """PPM or raw .npy tensor, as float [H, W, 3] in [0, 1]."""
    if str(path).endswith(".npy"):
        arr = np.load(path)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InputError(f"{path}: raw tensor must be [H, W, 3], got {arr.shape}")
        return arr.astype(np.float64)
    return read_ppm(path)


# ---------------------------------------------------------------------------
# manifests (newline-delimited JSON records, fixed key order)


def _write_ndjson(path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _read_ndjson(path):
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{line_no}: bad record: {exc}") from exc
    return rows


@dataclass
class SampleRecord:
    """One training/evaluation sample: an image plus its boxes and labels."""

    image: str
    face_bbox: Optional[BBox]
    body_bbox: Optional[BBox]
    age: float
    gender: str

    def __post_init__(self):
        if self.face_bbox is None and self.body_bbox is None:
            raise InputError(f"{self.image}: sample needs at least one bbox")
        if self.gender not in GENDERS:
            raise InputError(f"{self.image}: unknown gender {self.gender!r}")


def _bbox_or_none(value, where):
    if value is None:
        return None
    try:
        return BBox(*(int(v) for v in value))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: bad bbox {value!r}") from exc


def write_sample_manifest(path, records):
    rows = []
    for r in records:
        rows.append(
            {
                "image": r.image,
                "face_bbox": r.face_bbox.as_list() if r.face_bbox else None,
                "body_bbox": r.body_bbox.as_list() if r.body_bbox else None,
                "age": r.age,
                "gender": r.gender,
            }
        )
    _write_ndjson(path, rows)


def read_sample_manifest(path):
    records = []
    for i, row in enumerate(_read_ndjson(path), 1):
        try:
            records.append(
                SampleRecord(
                    image=row["image"],
                    face_bbox=_bbox_or_none(row.get("face_bbox"), f"{path}:{i}"),
                    body_bbox=_bbox_or_none(row.get("body_bbox"), f"{path}:{i}"),
                    age=float(row["age"]),
                    gender=row["gender"],
                )
            )
        except KeyError as exc:
            raise InputError(f"{path}:{i}: missing field {exc}") from exc
    if not records:
        raise InputError(f"{path}: empty manifest")
    return records


def read_detection_manifest(path):
    """[{image, detections: [Detection, ...]}, ...]"""
    out = []
    for i, row in enumerate(_read_ndjson(path), 1):
        try:
            dets = [
                Detection(
                    bbox=BBox(int(d["x0"]), int(d["y0"]), int(d["x1"]), int(d["y1"])),
                    kind=d["kind"],
                    score=float(d.get("score", 1.0)),
                )
                for d in row["detections"]
            ]
            out.append({"image": row["image"], "detections": dets})
        except KeyError as exc:
            raise InputError(f"{path}:{i}: missing field {exc}") from exc
    return out


def write_detection_manifest(path, entries):
    rows = []
    for e in entries:
        rows.append(
            {
                "image": e["image"],
                "detections": [
                    {
                        "kind": d.kind,
                        "x0": d.bbox.x0,
                        "y0": d.bbox.y0,
                        "x1": d.bbox.x1,
                        "y1": d.bbox.y1,
                        "score": d.score,
                    }
                    for d in e["detections"]
                ],
            }
        )
    _write_ndjson(path, rows)


def write_pair_manifest(path, rows):
    _write_ndjson(path, rows)


def read_votes_file(path):
    rows = _read_ndjson(path)
    for i, row in enumerate(rows, 1):
        if "task" not in row or "user" not in row:
            raise InputError(f"{path}:{i}: vote rows need task and user fields")
    return rows


def read_controls_file(path):
    """{user: [(voted, truth), ...]}"""
    answers = {}
    for i, row in enumerate(_read_ndjson(path), 1):
        try:
            answers.setdefault(str(row["user"]), []).append((float(row["voted"]), float(row["truth"])))
        except KeyError as exc:
            raise InputError(f"{path}:{i}: missing field {exc}") from exc
    return answers


# ---------------------------------------------------------------------------
# synthetic fixtures

SYNTH_IMAGE_SIDE = 96
# disjoint regions, so each view carries only its own signal
SYNTH_FACE_BBOX = BBox(32, 8, 64, 40)
SYNTH_BODY_BBOX = BBox(0, 40, 96, 96)
SYNTH_NOISE = 0.02


def synth_sample(rng, mode="shared"):
    """One synthetic person image with its ground truth."""
    if mode == "shared":
        age = float(rng.uniform(0.0, 100.0))
        face_signal = body_signal = age / 100.0
    elif mode == "split":
        # age information split across the two views: the face encodes one
        # half, the body the other, so neither view alone suffices
        u = float(rng.uniform(0.0, 50.0))
        v = float(rng.uniform(0.0, 50.0))
        age = u + v
        face_signal = u / 50.0
        body_signal = v / 50.0
    else:
        raise InputError(f"unknown synth mode {mode!r}")
    gender = "male" if rng.random() < 0.5 else "female"

    side = SYNTH_IMAGE_SIDE
    img = np.empty((side, side, 3))
    img[:] = 0.1 + 0.6 * body_signal
    fb = SYNTH_FACE_BBOX
    img[:fb.y1] = 0.4  # neutral band above the body region
    img[fb.y0:fb.y1, fb.x0:fb.x1] = 0.1 + 0.6 * face_signal
    channel = 0 if gender == "male" else 2
    img[:, :, channel] += 0.15
    img += rng.normal(0.0, SYNTH_NOISE, img.shape)
    img = np.clip(img, 0.0, 1.0)
    return img, age, gender


def generate_synthetic_dataset(out_dir, n, seed=0, mode="shared"):
    """Write n PPM images plus a sample manifest; returns the manifest path."""
    if n < 1:
        raise InputError(f"need at least one sample, got {n}")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        img, age, gender = synth_sample(rng, mode)
        name = f"sample_{i:05d}.ppm"
        write_ppm(os.path.join(out_dir, name), img)
        records.append(
            SampleRecord(
                image=name,
                face_bbox=SYNTH_FACE_BBOX,
                body_bbox=SYNTH_BODY_BBOX,
                age=round(age, 2),
                gender=gender,
            )
        )
    manifest = os.path.join(out_dir, "manifest.jsonl")
    write_sample_manifest(manifest, records)
    return manifest
