"""
Shared builders for the test suite: tiny configurations and random bundles.
"""
import numpy as np
import torch

from intelligibility.config import FeatureConfig, ModelConfig
from intelligibility.models import FeatureBundle, LFBFeatures, SpectralFeatures, SSLFeatures, UtteranceRecord

# Small enough for finite-difference checks over every parameter.
TINY_FEATURES = FeatureConfig(stft_window=64, stft_hop=32, lfb_filters=2, lfb_kernel_len=5)
TINY_MODEL = ModelConfig(cnn_channels=(2, 2), freq_stride=3, d_model=4, lstm_hidden=2)
TINY_SSL_DIM = 3


def random_bundle(rng, num_frames, feature_cfg=TINY_FEATURES, ssl_dim=TINY_SSL_DIM, utterance_id=None, branch=None):
    rate = feature_cfg.sample_rate_hz / feature_cfg.stft_hop
    return FeatureBundle(
        SpectralFeatures(rng.normal(-2.0, 1.0, (num_frames, feature_cfg.spectral_bins)), rate),
        LFBFeatures(rng.normal(-5.0, 1.0, (num_frames, feature_cfg.lfb_filters)), rate),
        SSLFeatures(rng.normal(0.0, 1.0, (num_frames, ssl_dim)), rate, 'test'),
        segments=rng.uniform(-0.5, 0.5, (num_frames, feature_cfg.segment_width)),
        utterance_id=utterance_id,
        branch=branch,
    )


def extend_bundle(bundle, extra_frames, rng):
    """The same bundle with ``extra_frames`` random rows appended."""
    def grow(matrix):
        return np.vstack([matrix, rng.normal(0.0, 1.0, (extra_frames, matrix.shape[1]))])

    return FeatureBundle(
        SpectralFeatures(grow(bundle.spectral.frames), bundle.spectral.frame_rate_hz),
        LFBFeatures(grow(bundle.lfb.frames), bundle.lfb.frame_rate_hz),
        SSLFeatures(grow(bundle.ssl.frames), bundle.ssl.frame_rate_hz, bundle.ssl.provider_id),
        segments=np.vstack([bundle.segments, rng.uniform(-0.5, 0.5, (extra_frames, bundle.segments.shape[1]))]),
    )


def random_dataset(rng, count, frames=(3, 5), split='train'):
    """Records with labels and matching binaural bundles."""
    records, features = [], {}
    for i in range(count):
        uid = f"{split}_{i:02d}"
        records.append(UtteranceRecord(uid, f"{uid}.wav", 'L0001', float(rng.uniform(5, 95)), split))
        num_frames = int(rng.integers(frames[0], frames[1] + 1))
        features[uid] = {
            b: random_bundle(rng, num_frames, utterance_id=uid, branch=b) for b in ('left', 'right')
        }
    return records, features


def state_equal(a, b):
    return a.keys() == b.keys() and all(torch.equal(a[k], b[k]) for k in a)
