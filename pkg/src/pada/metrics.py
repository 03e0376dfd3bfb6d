"""Mask similarity: intersection-over-union and mutual mask agreement.

IOU compares only the retained (bit = 1) regions of two masks; MMA counts
agreement in both the retained and the zeroed regions, so a pair of masks
that agree on half of all positions scores 0.5 even when the retained sets
barely overlap.  Counts accumulate as integers and the exact numerators and
denominators are exposed for tests; division happens once at the end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .params import StructureMismatchError, atomic_write_text
from .pruning import Mask


def _check_aligned(ma: Mask, mb: Mask) -> None:
    if len(ma.entries) != len(mb.entries):
        raise StructureMismatchError(
            f"masks cover {len(ma.entries)} vs {len(mb.entries)} tensors"
        )
    for i, (a, b) in enumerate(zip(ma.entries, mb.entries)):
        if a.name != b.name:
            raise StructureMismatchError(f"entry {i}: name {a.name!r} vs {b.name!r}")
        if a.shape != b.shape:
            raise StructureMismatchError(
                f"entry {i} ({a.name!r}): shape {a.shape} vs {b.shape}"
            )


def _pair_counts(a: np.ndarray, b: np.ndarray) -> tuple[int, int, int]:
    """(both retained, both zeroed, either retained) for one aligned bit pair."""
    inter1 = int(np.count_nonzero(a & b))
    inter0 = int(np.count_nonzero(~a & ~b))
    union1 = int(np.count_nonzero(a | b))
    return inter1, inter0, union1


def iou_counts(ma: Mask, mb: Mask) -> tuple[int, int]:
    """Exact (|a=1 and b=1|, |a=1 or b=1|) over all bits."""
    _check_aligned(ma, mb)
    inter = 0
    union = 0
    for a, b in zip(ma.entries, mb.entries):
        i1, _, u1 = _pair_counts(a.bits, b.bits)
        inter += i1
        union += u1
    return inter, union


def iou(ma: Mask, mb: Mask) -> float:
    """Intersection-over-union of the retained regions.

    When both masks retain nothing the union is empty; the two masks are then
    identical and the identical-masks convention returns 1.0.
    """
    inter, union = iou_counts(ma, mb)
    if union == 0:
        return 1.0
    return inter / union


def mma_counts(ma: Mask, mb: Mask) -> tuple[int, int]:
    """Exact (positions agreeing in either state, total positions)."""
    _check_aligned(ma, mb)
    agree = 0
    total = 0
    for a, b in zip(ma.entries, mb.entries):
        i1, i0, _ = _pair_counts(a.bits, b.bits)
        agree += i1 + i0
        total += a.bits.size
    return agree, total


def mma(ma: Mask, mb: Mask) -> float:
    """Mutual mask agreement: (retained-retained + zeroed-zeroed) / total bits."""
    agree, total = mma_counts(ma, mb)
    if total == 0:
        raise ValueError("cannot compute MMA of empty masks")
    return agree / total


@dataclass
class LayerScore:
    name: str
    iou: float
    mma: float
    empty_union: bool


@dataclass
class SimilarityReport:
    """Global and per-tensor IOU/MMA plus the provenance of both masks."""

    global_iou: float
    global_mma: float
    layers: list[LayerScore]
    source_a: str
    source_b: str
    rate_a: float
    rate_b: float
    empty_union: bool


def layerwise_report(ma: Mask, mb: Mask) -> SimilarityReport:
    """Compute IOU and MMA per prunable tensor and globally."""
    _check_aligned(ma, mb)
    if ma.total_bits == 0:
        raise ValueError("cannot compare empty masks")
    layers = []
    for a, b in zip(ma.entries, mb.entries):
        i1, i0, u1 = _pair_counts(a.bits, b.bits)
        layer_iou = 1.0 if u1 == 0 else i1 / u1
        layers.append(LayerScore(a.name, layer_iou, (i1 + i0) / a.bits.size, u1 == 0))
    return SimilarityReport(
        global_iou=iou(ma, mb),
        global_mma=mma(ma, mb),
        layers=layers,
        source_a=ma.source,
        source_b=mb.source,
        rate_a=ma.rate,
        rate_b=mb.rate,
        empty_union=iou_counts(ma, mb)[1] == 0,
    )


def report_to_csv(report: SimilarityReport, path: str) -> None:
    """Rows of (layer, iou, mma); the first row is the global score."""
    lines = ["layer,iou,mma"]
    lines.append(f"_global_,{report.global_iou!r},{report.global_mma!r}")
    for layer in report.layers:
        lines.append(f"{layer.name},{layer.iou!r},{layer.mma!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def report_to_json(report: SimilarityReport, path: str) -> None:
    doc = {
        "global": {
            "iou": report.global_iou,
            "mma": report.global_mma,
            "empty_union": report.empty_union,
        },
        "mask_a": {"source": report.source_a, "rate": report.rate_a},
        "mask_b": {"source": report.source_b, "rate": report.rate_b},
        "layers": [
            {
                "name": layer.name,
                "iou": layer.iou,
                "mma": layer.mma,
                "empty_union": layer.empty_union,
            }
            for layer in report.layers
        ],
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")
