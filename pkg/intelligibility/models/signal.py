from dataclasses import dataclass

import numpy as np

from intelligibility.exceptions import AudioFormatError


def _as_samples(values, name):
    samples = np.asarray(values, dtype=np.float64)
    if samples.ndim != 1:
        raise AudioFormatError(f"{name} must be one-dimensional")
    if samples.size == 0:
        raise AudioFormatError(f"{name} is empty (zero-length audio)")
    if not np.all(np.isfinite(samples)):
        raise AudioFormatError(f"{name} contains non-finite samples")
    if np.max(np.abs(samples)) > 1.0:
        raise AudioFormatError(f"{name} has samples outside [-1, 1]")
    return samples


@dataclass(frozen=True, eq=False)
class MonoSignal:
    """
    One channel of audio, samples normalized to [-1, 1].
    """
    sample_rate_hz: int
    samples: np.ndarray

    def __post_init__(self):
        if int(self.sample_rate_hz) <= 0:
            raise AudioFormatError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, 'sample_rate_hz', int(self.sample_rate_hz))
        object.__setattr__(self, 'samples', _as_samples(self.samples, 'samples'))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class BinauralSignal:
    """
    Two-channel audio; the first channel is the left ear, the second the right.
    """
    sample_rate_hz: int
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        if int(self.sample_rate_hz) <= 0:
            raise AudioFormatError(f"sample rate must be positive, got {self.sample_rate_hz}")
        left = _as_samples(self.left, 'left channel')
        right = _as_samples(self.right, 'right channel')
        if left.size != right.size:
            raise AudioFormatError(
                f"channel lengths differ: left={left.size}, right={right.size}"
            )
        object.__setattr__(self, 'sample_rate_hz', int(self.sample_rate_hz))
        object.__setattr__(self, 'left', left)
        object.__setattr__(self, 'right', right)

    def __len__(self):
        return self.left.size
