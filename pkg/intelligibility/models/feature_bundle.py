from dataclasses import dataclass
from typing import Optional

import numpy as np

from intelligibility.exceptions import FeatureError, ValidationError

# Effective bandwidth floor of every learnable filter, in Hz.
MIN_BAND_HZ = 50.0
# Effective low-cutoff floor; keeps 0 < low for any parameter value.
MIN_LOW_HZ = 1.0


def _finite_matrix(values, name):
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise FeatureError(f"{name} must be a matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise FeatureError(f"{name} contains non-finite values")
    return matrix


@dataclass(frozen=True, eq=False)
class SpectralFeatures:
    """Log-magnitude STFT frames, F x (window/2 + 1)."""
    frames: np.ndarray
    frame_rate_hz: float

    def __post_init__(self):
        frames = _finite_matrix(self.frames, 'spectral frames')
        if frames.shape[0] < 1:
            raise FeatureError("spectral features need at least one frame")
        object.__setattr__(self, 'frames', frames)

    @property
    def num_frames(self):
        return self.frames.shape[0]


@dataclass(frozen=True, eq=False)
class LFBParams:
    """
    Cutoff parameters of a sinc band-pass filter bank.

    ``cutoff_pairs`` is a num_filters x 2 matrix of raw (f_low, f_band)
    values in Hz. Any real values are legal: effective_cutoffs() maps them
    onto valid band-pass edges.
    """
    cutoff_pairs: np.ndarray
    kernel_len_samples: int
    sample_rate_hz: int

    def __post_init__(self):
        pairs = np.asarray(self.cutoff_pairs, dtype=np.float64)
        if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] < 1:
            raise ValidationError(f"cutoff_pairs must be num_filters x 2, got shape {pairs.shape}")
        if not np.all(np.isfinite(pairs)):
            raise ValidationError("cutoff_pairs must be finite")
        kernel_len = int(self.kernel_len_samples)
        if kernel_len < 1 or kernel_len % 2 == 0:
            raise ValidationError(f"kernel_len_samples must be odd and positive, got {kernel_len}")
        if int(self.sample_rate_hz) <= 0:
            raise ValidationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.sample_rate_hz / 2.0 <= MIN_BAND_HZ + MIN_LOW_HZ:
            raise ValidationError(f"sample rate {self.sample_rate_hz} Hz is too low for a filter bank")
        object.__setattr__(self, 'cutoff_pairs', pairs)
        object.__setattr__(self, 'kernel_len_samples', kernel_len)
        object.__setattr__(self, 'sample_rate_hz', int(self.sample_rate_hz))

    @property
    def num_filters(self):
        return self.cutoff_pairs.shape[0]

    def effective_cutoffs(self):
        """
        Realized (low, high) edges in Hz for every filter.

        Returns:
            num_filters x 2 array with 0 < low < high <= Nyquist
        """
        nyquist = self.sample_rate_hz / 2.0
        low = np.clip(np.abs(self.cutoff_pairs[:, 0]), MIN_LOW_HZ, nyquist - MIN_BAND_HZ)
        high = np.minimum(low + MIN_BAND_HZ + np.abs(self.cutoff_pairs[:, 1]), nyquist)
        return np.stack([low, high], axis=1)


@dataclass(frozen=True, eq=False)
class LFBFeatures:
    """Log-compressed filter-bank energies, F x num_filters."""
    frames: np.ndarray
    frame_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, 'frames', _finite_matrix(self.frames, 'LFB frames'))

    @property
    def num_frames(self):
        return self.frames.shape[0]


@dataclass(frozen=True, eq=False)
class SSLFeatures:
    """Frame-wise encoder representations, F_ssl x D."""
    frames: np.ndarray
    frame_rate_hz: float
    provider_id: str

    def __post_init__(self):
        frames = _finite_matrix(self.frames, 'SSL frames')
        if frames.shape[0] < 1:
            raise FeatureError("SSL features need at least one frame")
        object.__setattr__(self, 'frames', frames)

    @property
    def num_frames(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]


@dataclass(frozen=True, eq=False)
class FeatureBundle:
    """
    Time-aligned inputs of one branch for one utterance.

    ``segments`` holds the framed waveform (with filter context) that the
    learnable filter bank consumes at train time; ``lfb`` holds the filter
    energies at extraction-time cutoffs for inspection.
    """
    spectral: SpectralFeatures
    lfb: LFBFeatures
    ssl: SSLFeatures
    segments: Optional[np.ndarray] = None
    utterance_id: Optional[str] = None
    branch: Optional[str] = None

    def __post_init__(self):
        rows = {
            'spectral': self.spectral.num_frames,
            'lfb': self.lfb.num_frames,
            'ssl': self.ssl.num_frames,
        }
        if self.segments is not None:
            segments = _finite_matrix(self.segments, 'waveform segments')
            object.__setattr__(self, 'segments', segments)
            rows['segments'] = segments.shape[0]
        if len(set(rows.values())) != 1:
            detail = ', '.join(f"{k}={v}" for k, v in rows.items())
            raise FeatureError(f"feature streams are not aligned: {detail}")

    @property
    def num_frames(self):
        return self.spectral.num_frames
