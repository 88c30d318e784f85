"""
Frame alignment of the three feature streams.
"""
import numpy as np

from intelligibility.exceptions import FeatureError
from intelligibility.models import FeatureBundle, LFBFeatures, SpectralFeatures, SSLFeatures


def nearest_center_indices(num_target, num_source):
    """
    Source row used for every target frame.

    Both sequences span the same signal, so target frame f (center at
    (f + 1/2) / num_target of the duration) takes the source frame whose
    interval contains that instant.
    """
    if num_target < 1 or num_source < 1:
        raise FeatureError("cannot align empty feature streams")
    f = np.arange(num_target, dtype=np.int64)
    return ((2 * f + 1) * num_source) // (2 * num_target)


def align_features(spec: SpectralFeatures, lfb: LFBFeatures, ssl: SSLFeatures,
                   segments=None, utterance_id=None, branch=None) -> FeatureBundle:
    """
    Bring the embedding stream onto the spectral frame grid.

    Embedding rows are repeated (never interpolated), so aligned values are
    exactly the provider's values. The LFB stream is already
    frame-synchronous with the spectral stream.

    Raises:
        FeatureError: Empty inputs, or LFB/segment rows that do not match the
            spectral frame count
    """
    num_frames = spec.num_frames
    if num_frames < 1 or ssl.num_frames < 1:
        raise FeatureError("cannot align empty feature streams")
    if lfb.num_frames != num_frames:
        raise FeatureError(f"LFB stream has {lfb.num_frames} frames, spectral stream has {num_frames}")

    rows = nearest_center_indices(num_frames, ssl.num_frames)
    aligned = SSLFeatures(ssl.frames[rows], spec.frame_rate_hz, ssl.provider_id)
    return FeatureBundle(spec, lfb, aligned, segments=segments, utterance_id=utterance_id, branch=branch)
