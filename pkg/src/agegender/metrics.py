"""Evaluation metrics: MAE, cumulative score, gender accuracy, per-bin
error curves, and the regression-to-classification range mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


def _paired(pred, target, what):
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise InputError(f"{what}: length mismatch ({p.shape} vs {t.shape})")
    if p.size == 0:
        raise InputError(f"{what}: empty input")
    return p, t


def mae(pred_years, target_years):
    """Mean absolute error in years."""
    p, t = _paired(pred_years, target_years, "mae")
    return float(np.mean(np.abs(p - t)))


def cs_at(pred_years, target_years, level):
    """Cumulative score: percent of samples with |error| <= level years.

    The boundary is inclusive ("does not exceed").
    """
    if level < 0:
        raise InputError(f"cs level must be >= 0, got {level}")
    p, t = _paired(pred_years, target_years, "cs_at")
    return float(np.mean(np.abs(p - t) <= level) * 100.0)


def gender_accuracy(pred_labels, true_labels):
    """Percent of matching labels (labels may be ints or strings)."""
    p = list(pred_labels)
    t = list(true_labels)
    if len(p) != len(t):
        raise InputError(f"gender_accuracy: length mismatch ({len(p)} vs {len(t)})")
    if not p:
        raise InputError("gender_accuracy: empty input")
    hits = sum(1 for a, b in zip(p, t) if a == b)
    return 100.0 * hits / len(p)


def per_bin_mae(pred_years, target_years, bin_width=10):
    """MAE per true-age bin, for error-vs-age curves."""
    p, t = _paired(pred_years, target_years, "per_bin_mae")
    out = {}
    for lo in range(0, int(t.max()) + 1, bin_width):
        mask = (t >= lo) & (t < lo + bin_width)
        if mask.any():
            out[(lo, lo + bin_width - 1)] = float(np.mean(np.abs(p[mask] - t[mask])))
    return out


# ---------------------------------------------------------------------------
# classification range mapping


@dataclass(frozen=True)
class ClassRanges:
    """Ordered, non-overlapping inclusive (lo, hi) year ranges."""

    ranges: tuple

    def __post_init__(self):
        rs = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        object.__setattr__(self, "ranges", rs)
        for lo, hi in rs:
            if hi < lo:
                raise InputError(f"range ({lo}, {hi}) is inverted")
        for (_, hi), (lo, _) in zip(rs, rs[1:]):
            if lo <= hi:
                raise InputError("ranges must be ascending and non-overlapping")

    def __len__(self):
        return len(self.ranges)


# the eight-class protocol used by the classification benchmark
ADIENCE_RANGES = ClassRanges(
    ((0, 2), (4, 6), (8, 13), (15, 20), (25, 32), (38, 43), (48, 53), (60, 100))
)


def age_to_class(age, ranges: ClassRanges):
    """Index of the range containing `age`; ages falling in a gap map to the
    nearest range by boundary distance, ties to the lower index."""
    best = None
    for i, (lo, hi) in enumerate(ranges.ranges):
        if lo <= age <= hi:
            return i
        dist = max(lo - age, age - hi, 0.0)
        if best is None or dist < best[0]:
            best = (dist, i)
    return best[1]


# ---------------------------------------------------------------------------
# report


def metrics_report(pred_years, target_years, pred_gender=None, true_gender=None, cs_levels=range(1, 11)):
    """Standard evaluation bundle as an ordered {key: value} dict."""
    report = {"n": len(np.atleast_1d(np.asarray(pred_years)))}
    report["mae"] = mae(pred_years, target_years)
    for level in cs_levels:
        report[f"cs@{level}"] = cs_at(pred_years, target_years, level)
    if pred_gender is not None and true_gender is not None and len(list(true_gender)):
        report["gender_acc"] = gender_accuracy(pred_gender, true_gender)
    for (lo, hi), value in per_bin_mae(pred_years, target_years).items():
        report[f"mae[{lo}-{hi}]"] = value
    return report


def format_report(report):
    """Textual key -> value lines (the metrics wire format)."""
    lines = []
    for key, value in report.items():
        if isinstance(value, float):
            lines.append(f"{key} {value:.4f}")
        else:
            lines.append(f"{key} {value}")
    return "\n".join(lines) + "\n"
