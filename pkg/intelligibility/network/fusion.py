"""
Cross-branch fusion of frame scores.
"""
import numpy as np
import torch
from torch import nn

from intelligibility.exceptions import ValidationError
from intelligibility.models import AVERAGE_FUSION, FrameScores, FusionWeights


def _pad(frames: FrameScores, length):
    scores = np.zeros(length)
    scores[:len(frames)] = frames.scores
    mask = np.zeros(length, dtype=bool)
    mask[:len(frames)] = frames.valid_mask()
    return scores, mask


def fuse_linear(left: FrameScores, right: FrameScores, fw: FusionWeights) -> FrameScores:
    """
    Per-frame w_left * left + w_right * right + bias.

    Sequences of different length are zero-padded to the longer one; a fused
    frame is valid only where both inputs are valid.

    Raises:
        ValidationError: Both inputs empty
    """
    length = max(len(left), len(right))
    if length == 0:
        raise ValidationError("cannot fuse two empty frame sequences")
    left_scores, left_mask = _pad(left, length)
    right_scores, right_mask = _pad(right, length)
    fused = fw.w_left * left_scores + fw.w_right * right_scores + fw.bias
    mask = left_mask & right_mask
    return FrameScores(fused, 'fused', None if mask.all() else mask)


def fuse_average(left: FrameScores, right: FrameScores) -> FrameScores:
    """Elementwise mean; fuse_linear with (0.5, 0.5, 0)."""
    return fuse_linear(left, right, AVERAGE_FUSION)


class FusionLayer(nn.Module):
    """
    Trainable linear fusion, or the fixed average.

    Both modes evaluate w_left * left + w_right * right + bias, the average
    mode with the constants (0.5, 0.5, 0).
    """

    def __init__(self, mode='linear'):
        super().__init__()
        self.mode = mode
        initial = torch.tensor([AVERAGE_FUSION.w_left, AVERAGE_FUSION.w_right, AVERAGE_FUSION.bias])
        if mode == 'linear':
            self.weights = nn.Parameter(initial)
        elif mode == 'average':
            self.register_buffer('weights', initial, persistent=False)
        else:
            raise ValidationError(f"unknown fusion mode '{mode}'")

    def forward(self, left, right):
        return self.weights[0] * left + self.weights[1] * right + self.weights[2]

    def fusion_weights(self) -> FusionWeights:
        w = self.weights.detach().double().tolist()
        return FusionWeights(*w)
