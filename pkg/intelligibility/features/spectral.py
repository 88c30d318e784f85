"""
STFT spectral features and shared framing helpers.

Frame f covers samples [f*hop, f*hop + window); a signal of n samples gives
ceil(n / hop) frames, zero-padded at the end.
"""
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from intelligibility.exceptions import FeatureError
from intelligibility.models import MonoSignal, SpectralFeatures

# Floor added before every log so silent inputs map to log(1e-9), not -inf.
LOG_EPS = 1e-9


def check_framing(window, hop):
    if window < 64 or window & (window - 1):
        raise FeatureError(f"window must be a power of two >= 64, got {window}")
    if hop < 1 or hop > window:
        raise FeatureError(f"hop must be in [1, window], got {hop}")


def num_frames(num_samples, hop):
    return max(1, math.ceil(num_samples / hop))


def frame_signal(samples, window, hop):
    """F x window matrix of frames starting at multiples of hop."""
    samples = np.asarray(samples, dtype=np.float64)
    count = num_frames(samples.size, hop)
    padded = np.zeros((count - 1) * hop + window)
    padded[:min(samples.size, padded.size)] = samples[:padded.size]
    return sliding_window_view(padded, window)[::hop][:count].copy()


def frame_segments(samples, window, hop, kernel_len):
    """
    Frames widened by the filter context.

    Each row holds window + kernel_len - 1 samples, so a valid-mode
    convolution of a row with a kernel_len filter reproduces frame f of the
    same-mode filtered signal exactly.
    """
    samples = np.asarray(samples, dtype=np.float64)
    half = (kernel_len - 1) // 2
    count = num_frames(samples.size, hop)
    width = window + kernel_len - 1
    padded = np.zeros((count - 1) * hop + width)
    end = min(samples.size, padded.size - half)
    padded[half:half + end] = samples[:end]
    return sliding_window_view(padded, width)[::hop][:count].copy()


def stft_features(sig: MonoSignal, window=512, hop=256) -> SpectralFeatures:
    """
    Log-magnitude STFT with a periodic Hann window.

    Returns:
        SpectralFeatures with ceil(len/hop) frames of window/2 + 1 bins,
        each cell log(|X| + 1e-9)

    Raises:
        FeatureError: window not a power of two >= 64, or hop outside [1, window]
    """
    check_framing(window, hop)
    frames = frame_signal(sig.samples, window, hop) * sps.get_window('hann', window)
    magnitude = np.abs(np.fft.rfft(frames, axis=1))
    return SpectralFeatures(np.log(magnitude + LOG_EPS), sig.sample_rate_hz / hop)
