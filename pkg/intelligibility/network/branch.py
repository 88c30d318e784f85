"""
One branch of the predictor: CNN over spectra, learnable filter bank over
waveform segments, projection, BLSTM, multiplicative attention and a linear
frame head.

Padded frames never reach the network: every sequence is cut to its valid
frames before the forward pass, so a sequence's scores do not depend on how
much padding its batch carries.
"""
from dataclasses import dataclass
from typing import List

import numpy as np
import torch
from torch import nn

from intelligibility.exceptions import FeatureError, ValidationError
from intelligibility.features.lfb import SincFilterBank
from intelligibility.models import FeatureBundle, FrameScores
from intelligibility.network.attention import MultiplicativeAttention


@dataclass
class BranchInputs:
    """
    Padded feature tensors of one branch for a batch.

    spectral: (B, F, bins); segments: (B, F, width); ssl: (B, F, D);
    lengths: valid frames per item.
    """
    spectral: torch.Tensor
    segments: torch.Tensor
    ssl: torch.Tensor
    lengths: List[int]

    @classmethod
    def from_bundles(cls, bundles, num_frames=None, dtype=torch.float32):
        """Stack bundles, zero-padding every stream to ``num_frames`` rows."""
        if not bundles:
            raise FeatureError("cannot batch zero bundles")
        for bundle in bundles:
            if bundle.segments is None:
                raise FeatureError(f"bundle {bundle.utterance_id}.{bundle.branch} has no waveform segments")
        lengths = [b.num_frames for b in bundles]
        num_frames = max(lengths) if num_frames is None else num_frames

        def stack(matrices):
            out = np.zeros((len(matrices), num_frames, matrices[0].shape[1]))
            for i, m in enumerate(matrices):
                out[i, :m.shape[0]] = m
            return torch.from_numpy(out).to(dtype)

        return cls(
            spectral=stack([b.spectral.frames for b in bundles]),
            segments=stack([b.segments for b in bundles]),
            ssl=stack([b.ssl.frames for b in bundles]),
            lengths=lengths,
        )

    @property
    def num_frames(self):
        return self.spectral.shape[1]

    def mask(self):
        frames = torch.arange(self.num_frames)
        return frames[None, :] < torch.tensor(self.lengths)[:, None]


def conv_output_width(width, stride, kernel=3, padding=1):
    return (width + 2 * padding - kernel) // stride + 1


class BranchNetwork(nn.Module):
    """
    Frame-level intelligibility regressor for one ear.

    Args:
        spectral_bins: Bins per spectral frame
        lfb_params: Initial LFBParams of the learnable filter bank
        ssl_dim: Embedding dimension
        cfg: ModelConfig
    """

    def __init__(self, spectral_bins, lfb_params, ssl_dim, cfg):
        super().__init__()
        self.spectral_bins = int(spectral_bins)
        self.ssl_dim = int(ssl_dim)

        blocks = []
        in_channels, width = 1, self.spectral_bins
        for channels in cfg.cnn_channels:
            blocks += [
                nn.Conv2d(in_channels, channels, kernel_size=3, stride=(1, cfg.freq_stride), padding=1),
                nn.ReLU(),
            ]
            in_channels, width = channels, conv_output_width(width, cfg.freq_stride)
        self.cnn = nn.Sequential(*blocks)
        self.cnn_features = in_channels * width

        self.filter_bank = SincFilterBank(lfb_params)
        self.segment_width = lfb_params.kernel_len_samples

        self.projection = nn.Linear(self.cnn_features + self.filter_bank.num_filters + self.ssl_dim, cfg.d_model)
        self.norm = nn.LayerNorm(cfg.d_model)
        self.blstm = nn.LSTM(cfg.d_model, cfg.lstm_hidden, batch_first=True, bidirectional=True)
        self.attention = MultiplicativeAttention(2 * cfg.lstm_hidden)
        self.head = nn.Linear(4 * cfg.lstm_hidden, 1)

    def check_inputs(self, spectral, segments, ssl):
        if spectral.shape[-1] != self.spectral_bins:
            raise ValidationError(f"spectral stream has {spectral.shape[-1]} bins, branch expects {self.spectral_bins}")
        if ssl.shape[-1] != self.ssl_dim:
            raise ValidationError(f"embedding stream has dimension {ssl.shape[-1]}, branch expects {self.ssl_dim}")
        if segments.shape[-1] < self.segment_width:
            raise ValidationError(
                f"waveform segments of {segments.shape[-1]} samples are shorter than the filter length"
            )

    def forward_sequence(self, spectral, segments, ssl):
        """
        Scores of one unpadded sequence.

        Args:
            spectral: (F, bins); segments: (F, width); ssl: (F, D)

        Returns:
            (F,) frame scores
        """
        num_frames = spectral.shape[0]
        cnn = self.cnn(spectral[None, None])
        cnn = cnn.permute(0, 2, 1, 3).reshape(1, num_frames, self.cnn_features)
        lfb = self.filter_bank(segments)[None]
        z = self.norm(self.projection(torch.cat([cnn, lfb, ssl[None]], dim=-1)))
        h, _ = self.blstm(z)
        context = self.attention(h)
        return self.head(torch.cat([h, context], dim=-1))[0, :, 0]

    def forward(self, inputs: BranchInputs):
        """
        Returns:
            (B, F) frame scores, zero on padded frames
        """
        self.check_inputs(inputs.spectral, inputs.segments, inputs.ssl)
        rows = []
        for i, length in enumerate(inputs.lengths):
            scores = self.forward_sequence(
                inputs.spectral[i, :length], inputs.segments[i, :length], inputs.ssl[i, :length]
            )
            rows.append(nn.functional.pad(scores, (0, inputs.num_frames - length)))
        return torch.stack(rows)


def branch_forward(bundle: FeatureBundle, network: BranchNetwork, mask=None, branch='left') -> FrameScores:
    """
    Frame scores of one bundle.

    Only frames with a true ``mask`` entry enter the network (in order);
    masked frames score 0 and have no influence on the others.

    Raises:
        ValidationError: Mask length differs from the bundle, no valid
            frames, or bundle shapes that do not fit the network
    """
    if bundle.segments is None:
        raise FeatureError("bundle has no waveform segments")
    mask = np.ones(bundle.num_frames, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(-1)
    if mask.size != bundle.num_frames:
        raise ValidationError(f"mask length {mask.size} does not match {bundle.num_frames} frames")
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise ValidationError("no valid frames to score")

    dtype = next(network.parameters()).dtype
    spectral = torch.from_numpy(bundle.spectral.frames[rows]).to(dtype)
    segments = torch.from_numpy(bundle.segments[rows]).to(dtype)
    ssl = torch.from_numpy(bundle.ssl.frames[rows]).to(dtype)
    network.check_inputs(spectral, segments, ssl)
    with torch.no_grad():
        valid_scores = network.forward_sequence(spectral, segments, ssl).double().numpy()

    scores = np.zeros(bundle.num_frames)
    scores[rows] = valid_scores
    return FrameScores(scores, branch, mask)
