import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from intelligibility.exceptions import ValidationError

BRANCHES = ('left', 'right', 'fused')

# Labels are divided by this before training and predictions multiplied by it.
SCORE_SCALE = 100.0


@dataclass(frozen=True, eq=False)
class FrameScores:
    """
    Per-frame intelligibility predictions in normalized units (target [0, 1]).

    ``mask`` marks valid frames; None means every frame is valid.
    """
    scores: np.ndarray
    branch: str
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(scores)):
            raise ValidationError("frame scores must be finite")
        if self.branch not in BRANCHES:
            raise ValidationError(f"unknown branch '{self.branch}'")
        object.__setattr__(self, 'scores', scores)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool).reshape(-1)
            if mask.size != scores.size:
                raise ValidationError(
                    f"mask length {mask.size} does not match {scores.size} frame scores"
                )
            object.__setattr__(self, 'mask', mask)

    def __len__(self):
        return self.scores.size

    def valid_mask(self):
        if self.mask is None:
            return np.ones(self.scores.size, dtype=bool)
        return self.mask


@dataclass(frozen=True)
class UtteranceScore:
    """Pooled utterance prediction, normalized to [0, 1] internally."""
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValidationError("utterance score must be finite")
        object.__setattr__(self, 'value', float(self.value))

    def to_percent(self):
        """Interface value: 100 x clamp(value, 0, 1)"""
        return SCORE_SCALE * min(max(self.value, 0.0), 1.0)


@dataclass(frozen=True)
class FusionWeights:
    """Per-frame linear fusion: w_left * left + w_right * right + bias."""
    w_left: float
    w_right: float
    bias: float

    def __post_init__(self):
        for name in ('w_left', 'w_right', 'bias'):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"fusion weight {name} must be finite")
            object.__setattr__(self, name, value)


AVERAGE_FUSION = FusionWeights(0.5, 0.5, 0.0)


@dataclass(frozen=True)
class LossWeights:
    """Frame-level loss weights of the fused, left and right branches."""
    alpha_m: float = 1.0
    alpha_l: float = 1.0
    alpha_r: float = 1.0

    def __post_init__(self):
        for name in ('alpha_m', 'alpha_l', 'alpha_r'):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0.0:
                raise ValidationError(f"loss weight {name} must be a nonnegative number, got {value}")
            object.__setattr__(self, name, value)
