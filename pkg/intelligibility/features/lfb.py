"""
Learnable sinc filter bank.

Every filter is a Hamming-windowed ideal band-pass (difference of two sinc
low-passes) whose edges come from two trainable numbers per filter:

    low  = clamp(|f_low|, MIN_LOW_HZ, nyquist - MIN_BAND_HZ)
    high = min(low + MIN_BAND_HZ + |f_band|, nyquist)

so any parameter values realize 0 < low < high <= nyquist.
"""
import librosa
import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from intelligibility.exceptions import FeatureError
from intelligibility.features.spectral import LOG_EPS, check_framing, frame_segments
from intelligibility.models import MIN_BAND_HZ, MIN_LOW_HZ, LFBFeatures, LFBParams, MonoSignal

MEL_INIT_LOW_HZ = 30.0


def mel_initialized_params(num_filters=64, kernel_len=251, sample_rate_hz=16000) -> LFBParams:
    """Contiguous bands evenly spaced on the mel scale up to Nyquist."""
    high_hz = sample_rate_hz / 2.0 - (MIN_LOW_HZ + MIN_BAND_HZ)
    edges = librosa.mel_frequencies(n_mels=num_filters + 1, fmin=MEL_INIT_LOW_HZ, fmax=high_hz, htk=True)
    pairs = np.stack([edges[:-1], np.diff(edges)], axis=1)
    return LFBParams(pairs, kernel_len, sample_rate_hz)


class SincFilterBank(nn.Module):
    """
    Band-pass filter bank applied to framed waveform segments.

    Input rows carry window + kernel_len - 1 samples (see frame_segments);
    output is the log mean energy of each filter over the frame.
    """

    def __init__(self, params: LFBParams):
        super().__init__()
        self.sample_rate_hz = params.sample_rate_hz
        self.kernel_len = params.kernel_len_samples
        self.low_hz = nn.Parameter(torch.tensor(params.cutoff_pairs[:, 0], dtype=torch.float32))
        self.band_hz = nn.Parameter(torch.tensor(params.cutoff_pairs[:, 1], dtype=torch.float32))

        half = (self.kernel_len - 1) // 2
        self.register_buffer('taps', torch.arange(-half, half + 1, dtype=torch.float32))
        self.register_buffer('window', torch.hamming_window(self.kernel_len, periodic=False))

    @property
    def num_filters(self):
        return self.low_hz.shape[0]

    def effective_cutoffs(self):
        nyquist = self.sample_rate_hz / 2.0
        low = torch.clamp(self.low_hz.abs(), MIN_LOW_HZ, nyquist - MIN_BAND_HZ)
        high = torch.clamp(low + MIN_BAND_HZ + self.band_hz.abs(), max=nyquist)
        return low, high

    def filters(self):
        """num_filters x kernel_len impulse responses with unit passband gain."""
        low, high = self.effective_cutoffs()
        t = self.taps[None, :] / self.sample_rate_hz
        fs = self.sample_rate_hz
        low_pass_high = 2.0 * high[:, None] / fs * torch.sinc(2.0 * high[:, None] * t)
        low_pass_low = 2.0 * low[:, None] / fs * torch.sinc(2.0 * low[:, None] * t)
        return (low_pass_high - low_pass_low) * self.window

    def forward(self, segments):
        lead = segments.shape[:-1]
        width = segments.shape[-1]
        if width < self.kernel_len:
            raise FeatureError(f"segments of {width} samples are shorter than the {self.kernel_len}-tap filters")
        filtered = F.conv1d(segments.reshape(-1, 1, width), self.filters().unsqueeze(1))
        energy = filtered.pow(2).mean(dim=-1)
        return torch.log(energy + LOG_EPS).reshape(*lead, self.num_filters)

    def to_params(self) -> LFBParams:
        pairs = torch.stack([self.low_hz, self.band_hz], dim=1).detach().cpu().double().numpy()
        return LFBParams(pairs, self.kernel_len, self.sample_rate_hz)


def _bank_for(params: LFBParams):
    bank = SincFilterBank(params).double()
    with torch.no_grad():
        bank.low_hz.copy_(torch.from_numpy(params.cutoff_pairs[:, 0]))
        bank.band_hz.copy_(torch.from_numpy(params.cutoff_pairs[:, 1]))
    return bank


def lfb_features(sig: MonoSignal, params: LFBParams, hop=256, window=512) -> LFBFeatures:
    """
    Filter-bank energies framed exactly like stft_features(sig, window, hop).

    Raises:
        FeatureError: Invalid framing or a sample rate that differs from the
            filter bank's
    """
    check_framing(window, hop)
    if sig.sample_rate_hz != params.sample_rate_hz:
        raise FeatureError(
            f"signal rate {sig.sample_rate_hz} Hz does not match filter bank rate {params.sample_rate_hz} Hz"
        )
    segments = frame_segments(sig.samples, window, hop, params.kernel_len_samples)
    with torch.no_grad():
        energies = _bank_for(params)(torch.from_numpy(segments))
    return LFBFeatures(energies.numpy(), sig.sample_rate_hz / hop)


def lfb_gradient(params: LFBParams, sig: MonoSignal, loss_fn, hop=256, window=512) -> np.ndarray:
    """
    Gradient of ``loss_fn(energies)`` with respect to the raw cutoff pairs.

    Args:
        params: Filter-bank parameters
        sig: Input signal at the filter bank's rate
        loss_fn: Maps the F x num_filters float64 energy tensor to a scalar tensor

    Returns:
        num_filters x 2 array of (d/d f_low, d/d f_band)
    """
    check_framing(window, hop)
    bank = _bank_for(params)
    segments = torch.from_numpy(frame_segments(sig.samples, window, hop, params.kernel_len_samples))
    loss = loss_fn(bank(segments))
    low_grad, band_grad = torch.autograd.grad(loss, [bank.low_hz, bank.band_hz])
    return torch.stack([low_grad, band_grad], dim=1).numpy()
