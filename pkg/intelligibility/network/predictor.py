"""
Full predictors: two branches with fusion, or one standalone branch.
"""
from dataclasses import dataclass
from typing import Dict

import torch
from torch import nn

from intelligibility.exceptions import ValidationError
from intelligibility.models import FrameScores, UtteranceScore
from intelligibility.network.branch import BranchNetwork, branch_forward
from intelligibility.network.fusion import FusionLayer, fuse_linear
from intelligibility.network.loss import batch_objective, global_average_pool, pool_frames

KINDS = ('binaural', 'single-left', 'single-right')


@dataclass(frozen=True)
class Prediction:
    """Pooled score plus the frame scores it was pooled from."""
    score: UtteranceScore
    frames: Dict[str, FrameScores]

    @property
    def percent(self):
        return self.score.to_percent()


def _branch(feature_cfg, model_cfg, ssl_dim):
    return BranchNetwork(feature_cfg.spectral_bins, feature_cfg.initial_lfb_params(), ssl_dim, model_cfg)


class BinauralPredictor(nn.Module):
    """
    Left and right branches (weights not shared), per-frame fusion and
    global average pooling of the fused scores.
    """
    kind = 'binaural'
    branches = ('left', 'right')

    def __init__(self, feature_cfg, model_cfg, ssl_dim, fusion_mode='linear'):
        super().__init__()
        self.fusion_mode = fusion_mode
        self.left = _branch(feature_cfg, model_cfg, ssl_dim)
        self.right = _branch(feature_cfg, model_cfg, ssl_dim)
        self.fusion = FusionLayer(fusion_mode)

    def forward(self, inputs):
        """
        Args:
            inputs: dict branch -> BranchInputs, padded to the same frame count

        Returns:
            dict with (B, F) 'left', 'right', 'fused' scores, their
            'lengths', and (B,) 'pooled' predictions
        """
        left_in, right_in = inputs['left'], inputs['right']
        if left_in.num_frames != right_in.num_frames:
            raise ValidationError("left and right inputs must be padded to the same frame count")
        left = self.left(left_in)
        right = self.right(right_in)
        fused = self.fusion(left, right)
        fused_lengths = [min(a, b) for a, b in zip(left_in.lengths, right_in.lengths)]
        return {
            'left': left,
            'right': right,
            'fused': fused,
            'lengths': {'left': left_in.lengths, 'right': right_in.lengths, 'fused': fused_lengths},
            'pooled': pool_frames(fused, fused_lengths),
        }

    def objective(self, outputs, targets, lw):
        lengths = outputs['lengths']
        return batch_objective(targets, outputs['pooled'], [
            (lw.alpha_m, outputs['fused'], lengths['fused']),
            (lw.alpha_l, outputs['left'], lengths['left']),
            (lw.alpha_r, outputs['right'], lengths['right']),
        ])

    def predict(self, bundles) -> Prediction:
        self.eval()
        left = branch_forward(bundles['left'], self.left, branch='left')
        right = branch_forward(bundles['right'], self.right, branch='right')
        fused = fuse_linear(left, right, self.fusion.fusion_weights())
        return Prediction(global_average_pool(fused), {'left': left, 'right': right, 'fused': fused})


class SingleBranchPredictor(nn.Module):
    """One ear's branch with global average pooling; no fusion parameters."""

    def __init__(self, feature_cfg, model_cfg, ssl_dim, ear='left'):
        super().__init__()
        if ear not in ('left', 'right'):
            raise ValidationError(f"ear must be 'left' or 'right', got '{ear}'")
        self.ear = ear
        self.kind = f"single-{ear}"
        self.branches = (ear,)
        self.fusion_mode = None
        self.branch = _branch(feature_cfg, model_cfg, ssl_dim)

    def forward(self, inputs):
        branch_in = inputs[self.ear]
        scores = self.branch(branch_in)
        return {
            self.ear: scores,
            'lengths': {self.ear: branch_in.lengths},
            'pooled': pool_frames(scores, branch_in.lengths),
        }

    def objective(self, outputs, targets, lw):
        alpha = lw.alpha_l if self.ear == 'left' else lw.alpha_r
        return batch_objective(targets, outputs['pooled'], [
            (alpha, outputs[self.ear], outputs['lengths'][self.ear]),
        ])

    def predict(self, bundles) -> Prediction:
        self.eval()
        frames = branch_forward(bundles[self.ear], self.branch, branch=self.ear)
        return Prediction(global_average_pool(frames), {self.ear: frames})


def build_predictor(kind, feature_cfg, model_cfg, ssl_dim, fusion_mode='linear'):
    if kind == 'binaural':
        return BinauralPredictor(feature_cfg, model_cfg, ssl_dim, fusion_mode)
    if kind in ('single-left', 'single-right'):
        return SingleBranchPredictor(feature_cfg, model_cfg, ssl_dim, kind.split('-', 1)[1])
    raise ValidationError(f"unknown predictor kind '{kind}'")


def predict(model, bundle_left=None, bundle_right=None) -> Prediction:
    """
    Score one utterance.

    The interface value is ``prediction.percent`` = 100 x clamp(pooled, 0, 1).
    A single-branch model only needs the bundle of its own ear.
    """
    bundles = {'left': bundle_left, 'right': bundle_right}
    for branch in model.branches:
        if bundles[branch] is None:
            raise ValidationError(f"{model.kind} model needs a {branch} bundle")
    with torch.no_grad():
        return model.predict(bundles)
