"""
Global average pooling and the combined utterance/frame training objective.

Per utterance u with F_u valid frames and label I_u:

    (I_u - P_u)^2 + sum over branches b of (alpha_b / F_u) * sum_f (I_u - s_bf)^2

where P_u is the pooled prediction and b ranges over fused, left and right
frame scores. The batch objective is the mean over utterances.
"""
import numpy as np
import torch

from intelligibility.exceptions import ValidationError
from intelligibility.models import FrameScores, LossWeights, UtteranceScore


def _valid(frames: FrameScores, mask):
    if mask is None:
        mask = frames.valid_mask()
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if mask.size != len(frames):
        raise ValidationError(f"mask length {mask.size} does not match {len(frames)} frames")
    if not mask.any():
        raise ValidationError("no valid frames")
    return frames.scores[mask]


def global_average_pool(frames: FrameScores, mask=None) -> UtteranceScore:
    """
    Mean of the valid frame scores.

    Raises:
        ValidationError: Zero valid frames
    """
    return UtteranceScore(float(np.mean(_valid(frames, mask))))


def compute_loss(true_score, predicted, fused=None, left=None, right=None,
                 lw: LossWeights = LossWeights(), mask=None) -> float:
    """
    Objective of one utterance, all scores in normalized units.

    Args:
        true_score: I_u
        predicted: Pooled prediction (float or UtteranceScore)
        fused, left, right: FrameScores; a None sequence contributes no term
        lw: Frame-term weights (alpha_m, alpha_l, alpha_r)
        mask: Valid frames shared by all sequences (defaults to each
            sequence's own mask)

    Raises:
        ValidationError: Zero valid frames
    """
    target = float(true_score)
    pooled = predicted.value if isinstance(predicted, UtteranceScore) else float(predicted)
    total = (target - pooled) ** 2
    for alpha, frames in ((lw.alpha_m, fused), (lw.alpha_l, left), (lw.alpha_r, right)):
        if frames is None:
            continue
        valid = _valid(frames, mask)
        total += alpha * float(np.mean((target - valid) ** 2))
    return total


def pool_frames(scores, lengths):
    """(B,) means of the first lengths[i] frames of every row of ``scores``."""
    return torch.stack([scores[i, :n].mean() for i, n in enumerate(lengths)])


def frame_error(scores, targets, lengths):
    """(B,) mean squared deviation of valid frames from the utterance targets."""
    return torch.stack([((targets[i] - scores[i, :n]) ** 2).mean() for i, n in enumerate(lengths)])


def batch_objective(targets, pooled, frame_terms):
    """
    Batch mean of the per-utterance objective.

    Args:
        targets: (B,) labels I_u
        pooled: (B,) pooled predictions
        frame_terms: Iterable of (alpha, scores (B, F), lengths)

    Returns:
        Scalar tensor
    """
    per_utterance = (targets - pooled) ** 2
    for alpha, scores, lengths in frame_terms:
        if alpha == 0.0:
            continue
        per_utterance = per_utterance + alpha * frame_error(scores, targets, lengths)
    return per_utterance.mean()
