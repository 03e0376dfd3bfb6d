"""Unstructured magnitude pruning.

Masks select an exact count of least-magnitude weights under a single global
ranking across all prunable tensors.  Zeroing writes 0.0 at the selected
positions and deliberately keeps no record of the mask: the weights stay
trainable and may regrow under later gradient updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import (
    MASK_MAGIC,
    ParameterSet,
    StructureMismatchError,
    Tensor,
    flat_prunable_values,
    read_container,
    write_container,
)

MASK_SOURCES = ("TAG", "TAW", "CD-TAW", "in-loop")


@dataclass(eq=False)
class MaskEntry:
    """Retain/zero bits for one prunable tensor (True = retained)."""

    name: str
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=bool)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.bits.shape

    @property
    def size(self) -> int:
        return self.bits.size


@dataclass(eq=False)
class Mask:
    """Per-tensor bitsets aligned to a ParameterSet's prunable tensors.

    ``source`` and ``rate`` record provenance only; equality compares
    structure and bits, so masks produced by different strategies can be
    tested for identical content.
    """

    entries: list[MaskEntry] = field(default_factory=list)
    source: str = "in-loop"
    rate: float = 0.0

    def __post_init__(self):
        if self.source not in MASK_SOURCES:
            raise ValueError(f"unknown mask source {self.source!r}")

    @property
    def total_bits(self) -> int:
        return sum(e.size for e in self.entries)

    @property
    def zero_bits(self) -> int:
        return int(sum(np.count_nonzero(~e.bits) for e in self.entries))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mask):
            return NotImplemented
        return (
            len(self.entries) == len(other.entries)
            and all(
                a.name == b.name and a.shape == b.shape and np.array_equal(a.bits, b.bits)
                for a, b in zip(self.entries, other.entries)
            )
        )


def prune_count(rate: float, d_prunable: int) -> int:
    """Number of weights zeroed at ``rate`` percent: floor(rate/100 * d)."""
    return int(math.floor(rate / 100.0 * d_prunable))


def _require_prunable(ps: ParameterSet) -> list[Tensor]:
    prunable = ps.prunable_tensors()
    if not prunable:
        raise ValueError("parameter set has no prunable tensors")
    return prunable


def compute_ump_mask(ps: ParameterSet, rate: float, source: str = "in-loop") -> Mask:
    """Mask the ``floor(rate/100 * d_prunable)`` smallest-|value| weights.

    Ranking is global over all prunable tensors.  Ties at the threshold are
    broken by flat position (earlier elements pruned first), which makes the
    mask deterministic; exact zeros therefore rank first among equal
    magnitudes in position order.
    """
    if not 0.0 <= rate <= 100.0:
        raise ValueError(f"prune rate must be in [0, 100], got {rate}")
    prunable = _require_prunable(ps)
    values = flat_prunable_values(ps)
    z = prune_count(rate, values.size)
    keep = np.ones(values.size, dtype=bool)
    if z > 0:
        order = np.argsort(np.abs(values), kind="stable")
        keep[order[:z]] = False
    entries = []
    offset = 0
    for t in prunable:
        entries.append(MaskEntry(t.name, keep[offset : offset + t.size].reshape(t.shape)))
        offset += t.size
    return Mask(entries, source=source, rate=float(rate))


def mask_alignment_error(mask: Mask, ps: ParameterSet) -> str | None:
    """Describe the first mask-vs-set structural mismatch, or None if aligned."""
    prunable = ps.prunable_tensors()
    if len(mask.entries) != len(prunable):
        return f"mask covers {len(mask.entries)} tensors, set has {len(prunable)} prunable"
    for i, (e, t) in enumerate(zip(mask.entries, prunable)):
        if e.name != t.name:
            return f"entry {i}: mask name {e.name!r} vs tensor {t.name!r}"
        if e.shape != t.shape:
            return f"entry {i} ({e.name!r}): mask shape {e.shape} vs tensor {t.shape}"
    return None


def apply_zeroing(ps: ParameterSet, mask: Mask) -> ParameterSet:
    """Return a copy of ``ps`` with 0.0 where the mask bit is 0.

    The result carries no mask: nothing distinguishes a zeroed weight from a
    weight that happened to be zero, and subsequent gradient updates may make
    zeroed weights nonzero again.
    """
    problem = mask_alignment_error(mask, ps)
    if problem is not None:
        raise StructureMismatchError(f"mask does not align with parameter set: {problem}")
    by_name = {e.name: e for e in mask.entries}
    tensors = []
    for t in ps.tensors:
        if t.prunable:
            data = np.where(by_name[t.name].bits, t.data, np.float32(0.0))
            tensors.append(Tensor(t.name, data, t.prunable))
        else:
            tensors.append(t.copy())
    return ParameterSet(tensors, ps.role, dict(ps.meta))


def sparsity(ps: ParameterSet) -> float:
    """Fraction of exactly-zero values among prunable elements."""
    _require_prunable(ps)
    values = flat_prunable_values(ps)
    return float(np.count_nonzero(values == 0.0) / values.size)


def save_mask(mask: Mask, path: str) -> None:
    """Write a .padm file: the checkpoint container with packed-bit payloads."""
    records = [
        (e.name, True, e.shape, np.packbits(e.bits.ravel(), bitorder="little").tobytes())
        for e in mask.entries
    ]
    metadata = {"source": mask.source, "rate": repr(mask.rate)}
    write_container(path, MASK_MAGIC, records, metadata)


def load_mask(path: str) -> Mask:
    """Read a .padm file; exact inverse of :func:`save_mask`."""
    records, metadata = read_container(
        path, MASK_MAGIC, "PADA mask", lambda n: (n + 7) // 8
    )
    entries = []
    for name, _prunable, shape, payload in records:
        n = 1
        for d in shape:
            n *= d
        bits = np.unpackbits(
            np.frombuffer(payload, dtype=np.uint8), count=n, bitorder="little"
        ).astype(bool)
        entries.append(MaskEntry(name, bits.reshape(shape)))
    source = metadata.get("source", "in-loop")
    rate = float(metadata.get("rate", "0.0"))
    return Mask(entries, source=source, rate=rate)
