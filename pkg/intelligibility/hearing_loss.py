"""
Audiogram-driven hearing-loss simulation.

A simplified stand-in for a full hearing-loss model: STFT analysis with a
square-root Hann window, per-bin attenuation by the interpolated audiogram
(dB HL used directly as dB of gain reduction), optional spectral smearing of
the magnitude spectrum, and overlap-add synthesis. Loudness recruitment and
temporal fine-structure loss are not modelled.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from scipy import signal as sps

from intelligibility.exceptions import ValidationError
from intelligibility.models import FREQUENCIES_HZ, Audiogram, MonoSignal

logger = logging.getLogger(__name__)

SEVERITY_CLASSES = ('none', 'mild', 'moderate', 'severe')

# Upper bounds (exclusive) of the mean threshold for none/mild/moderate.
SEVERITY_CUTS_DB = (20.0, 35.0, 56.0)

DEFAULT_BROADENING = {'none': 1.0, 'mild': 1.6, 'moderate': 2.4, 'severe': 4.0}

# Gaussian smearing width per unit of broadening above 1, in octaves.
SMEAR_OCTAVES_PER_BROADENING = 1.0 / 12.0

ANALYSIS_WINDOW_S = 0.032
ANALYSIS_HOP_S = 0.008


@dataclass(frozen=True)
class HearingLossConfig:
    """STFT framing and smearing settings of the simulator."""
    stft_window_samples: int
    stft_hop_samples: int
    smearing_enabled: bool = False
    smearing_broadening: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_BROADENING))

    def __post_init__(self):
        if int(self.stft_window_samples) < 2:
            raise ValidationError(f"stft_window_samples must be >= 2, got {self.stft_window_samples}")
        if int(self.stft_hop_samples) < 1:
            raise ValidationError(f"stft_hop_samples must be positive, got {self.stft_hop_samples}")
        if self.stft_hop_samples > self.stft_window_samples:
            raise ValidationError("stft_hop_samples must not exceed stft_window_samples")
        missing = [c for c in SEVERITY_CLASSES if c not in self.smearing_broadening]
        if missing:
            raise ValidationError(f"smearing_broadening lacks classes: {', '.join(missing)}")
        for name, factor in self.smearing_broadening.items():
            if not factor >= 1.0:
                raise ValidationError(f"broadening factor for '{name}' must be >= 1, got {factor}")

    @classmethod
    def for_sample_rate(cls, sample_rate_hz, smearing_enabled=False):
        """32 ms window, 8 ms hop at the given rate."""
        return cls(
            stft_window_samples=int(round(ANALYSIS_WINDOW_S * sample_rate_hz)),
            stft_hop_samples=int(round(ANALYSIS_HOP_S * sample_rate_hz)),
            smearing_enabled=smearing_enabled,
        )


def severity_class(ag: Audiogram) -> str:
    """Band the mean anchor threshold: <20 none, <35 mild, <56 moderate, else severe."""
    mean = ag.mean_threshold()
    for name, cut in zip(SEVERITY_CLASSES, SEVERITY_CUTS_DB):
        if mean < cut:
            return name
    return SEVERITY_CLASSES[-1]


def interpolate_audiogram(ag: Audiogram, freqs_hz) -> np.ndarray:
    """
    Thresholds at arbitrary frequencies.

    Linear in log-frequency between the anchors, flat outside [250, 8000] Hz.
    """
    freqs = np.clip(np.asarray(freqs_hz, dtype=np.float64), FREQUENCIES_HZ[0], FREQUENCIES_HZ[-1])
    return np.interp(np.log(freqs), np.log(FREQUENCIES_HZ), ag.thresholds_db_hl)


def smearing_matrix(freqs_hz, broadening) -> np.ndarray:
    """
    Gaussian-in-log-frequency spreading matrix.

    Row j distributes the magnitude of input bin j over the output bins and
    sums to 1, so ``magnitudes @ S`` conserves total magnitude. A broadening
    of 1 gives the identity.
    """
    freqs = np.asarray(freqs_hz, dtype=np.float64)
    sigma = SMEAR_OCTAVES_PER_BROADENING * (float(broadening) - 1.0)
    if sigma <= 0.0:
        return np.eye(freqs.size)
    floor = freqs[1] / 2.0 if freqs.size > 1 and freqs[1] > 0 else 1.0
    octaves = np.log2(np.maximum(freqs, floor))
    distance = (octaves[None, :] - octaves[:, None]) / sigma
    weights = np.exp(-0.5 * distance ** 2)
    return weights / weights.sum(axis=1, keepdims=True)


def smear_spectrum(spectrum, freqs_hz, broadening) -> np.ndarray:
    """
    Spread the magnitudes of an STFT (bins x frames) across frequency.

    Each bin keeps its own phase. The summed magnitude of every frame is
    unchanged.
    """
    smear = smearing_matrix(freqs_hz, broadening)
    magnitude = np.abs(spectrum)
    phase = np.exp(1j * np.angle(spectrum))
    return (smear.T @ magnitude) * phase


def apply_hearing_loss(sig: MonoSignal, ag: Audiogram, cfg: HearingLossConfig) -> MonoSignal:
    """
    Simulate what a listener with audiogram ``ag`` hears of ``sig``.

    Each STFT bin at frequency f is scaled by 10^(-T(f)/20); with smearing
    enabled the magnitude spectrum is first spread by the smearing matrix of
    the audiogram's severity class (phase kept).

    Raising one anchor threshold never raises the output energy of any band
    by more than 0.01 dB; the residue is window leakage from neighbouring
    bins once a band is attenuated by ~100 dB.

    Output is clipped to [-1, 1]; a warning is logged when that changes
    any sample.

    Raises:
        ValidationError: Signal shorter than one analysis window
    """
    n = len(sig)
    window_len, hop = cfg.stft_window_samples, cfg.stft_hop_samples
    if n < window_len:
        raise ValidationError(
            f"signal has {n} samples, shorter than one analysis window ({window_len})"
        )

    window = np.sqrt(sps.get_window('hann', window_len))
    stft_kwargs = dict(fs=sig.sample_rate_hz, window=window, nperseg=window_len, noverlap=window_len - hop)
    freqs, _, spectrum = sps.stft(sig.samples, boundary='zeros', padded=True, **stft_kwargs)

    gains = 10.0 ** (-interpolate_audiogram(ag, freqs) / 20.0)

    if cfg.smearing_enabled:
        spectrum = smear_spectrum(spectrum, freqs, cfg.smearing_broadening[severity_class(ag)])

    _, out = sps.istft(gains[:, None] * spectrum, boundary=True, **stft_kwargs)
    out = np.real(out)[:n]
    if out.size < n:
        out = np.pad(out, (0, n - out.size))
    clipped = int(np.count_nonzero(np.abs(out) > 1.0))
    if clipped:
        logger.warning("Hearing-loss output clipped: %d sample(s) outside [-1, 1]", clipped)
    return MonoSignal(sig.sample_rate_hz, np.clip(out, -1.0, 1.0))
