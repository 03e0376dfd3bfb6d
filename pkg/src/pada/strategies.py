"""Initial-mask strategies: TAG, TAW and CD-TAW.

The three strategies differ only in where the magnitudes that rank the
weights come from; the resulting mask is always applied to the pre-trained
model's values.

* TAG ranks the pre-trained model's own weights.
* TAW fine-tunes a copy of the pre-trained model on the target labeled data
  first and ranks the fine-tuned weights; the fine-tuned copy is discarded.
* CD-TAW ranks the weights of a separately fine-tuned donor model, making use
  of readily available fine-tuned checkpoints, and never reads the
  pre-trained values at all.
"""

from __future__ import annotations

from dataclasses import dataclass

from .params import (
    ParameterSet,
    StructureMismatchError,
    load_checkpoint,
    shapes_compatible,
    structural_mismatch,
)
from .pruning import Mask, apply_zeroing, compute_ump_mask
from .trainer import LabeledBatch, TrainConfig, finetune_supervised

STRATEGY_KINDS = ("TAG", "TAW", "CD-TAW")


@dataclass
class StrategySpec:
    """Which strategy produces the initial mask, at what rate, plus its inputs.

    TAW needs a fine-tune config (the target labeled data is passed to
    :func:`initial_model` alongside the spec); CD-TAW needs a donor parameter
    set or a donor checkpoint path.
    """

    kind: str
    rate: float
    taw_cfg: TrainConfig | None = None
    donor_path: str | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        self.rate = float(self.rate)
        if not 0.0 <= self.rate <= 100.0:
            raise ValueError(f"prune rate must be in [0, 100], got {self.rate}")


def tag_mask(pretrained: ParameterSet, r1: float) -> Mask:
    """Task-agnostic mask: rank the pre-trained weights directly."""
    return compute_ump_mask(pretrained, r1, source="TAG")


def taw_mask(
    pretrained: ParameterSet,
    target_data: LabeledBatch,
    r1: float,
    cfg: TrainConfig,
) -> Mask:
    """Task-aware mask: fine-tune a copy on the target data, rank the result.

    The fine-tuned copy exists only to supply magnitudes; ``pretrained`` is
    left untouched and the mask is meant to be applied to it.
    """
    if target_data.n < 1:
        raise ValueError("TAW requires a nonempty target dataset")
    finetuned = finetune_supervised(pretrained, target_data, cfg)
    mask = compute_ump_mask(finetuned, r1, source="TAW")
    return mask


def cdtaw_mask(pretrained: ParameterSet, donor: ParameterSet, r1: float) -> Mask:
    """Cross-domain task-aware mask: rank the donor's weights.

    The donor must be structurally identical to the pre-trained model so the
    mask positions mean the same weights.  Only donor magnitudes are read;
    the mask is applied to the pre-trained values downstream.
    """
    if not shapes_compatible(pretrained, donor):
        raise StructureMismatchError(
            f"donor incompatible with pretrained model: {structural_mismatch(pretrained, donor)}"
        )
    return compute_ump_mask(donor, r1, source="CD-TAW")


def initial_model(
    pretrained: ParameterSet,
    spec: StrategySpec,
    target_data: LabeledBatch | None = None,
    donor: ParameterSet | None = None,
) -> tuple[ParameterSet, Mask]:
    """Dispatch to the chosen strategy and zero the pre-trained model.

    Returns the zeroed model (all weights still trainable) together with the
    mask so callers can analyze mask similarity later.
    """
    if spec.kind == "TAG":
        mask = tag_mask(pretrained, spec.rate)
    elif spec.kind == "TAW":
        if target_data is None:
            raise ValueError("TAW requires a target dataset")
        if spec.taw_cfg is None:
            raise ValueError("TAW requires a fine-tune config (taw_cfg)")
        mask = taw_mask(pretrained, target_data, spec.rate, spec.taw_cfg)
    else:
        if donor is None:
            if spec.donor_path is None:
                raise ValueError("CD-TAW requires a donor parameter set or donor_path")
            donor = load_checkpoint(spec.donor_path)
        mask = cdtaw_mask(pretrained, donor, spec.rate)
    return apply_zeroing(pretrained, mask), mask
