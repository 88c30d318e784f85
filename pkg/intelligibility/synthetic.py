"""
Synthetic binaural corpus for desk-scale runs and tests.

Each utterance is an amplitude-modulated harmonic complex in white noise,
mixed at its own SNR per ear, and is heard by one of four listeners of
graded hearing loss. Labels are a fixed monotone function of SNR and hearing
loss:

    100 / (1 + exp(-(snr - 3 - 0.25 * (mean_hl - 20)) / 4))

with snr the mean of the two ears' SNRs and mean_hl the mean threshold over
both audiograms.
"""
import logging
import math
from pathlib import Path

import numpy as np

from intelligibility.corpus import write_audiograms, write_manifest, write_wav
from intelligibility.models import Audiogram, BinauralSignal, ListenerProfile, UtteranceRecord

logger = logging.getLogger(__name__)

SAMPLE_RATE_HZ = 16000
DURATION_S = 0.5
SNR_RANGE_DB = (-10.0, 20.0)
EAR_SNR_SPREAD_DB = 3.0
PEAK = 0.9

LISTENERS = (
    ('L0001', (10, 10, 10, 10, 15, 15, 20, 20)),
    ('L0002', (15, 20, 25, 30, 35, 40, 45, 50)),
    ('L0003', (30, 35, 40, 50, 55, 60, 65, 70)),
    ('L0004', (50, 55, 60, 70, 75, 80, 85, 90)),
)


def intelligibility_label(snr_db, mean_hl_db):
    """Synthetic correctness (0-100) of an utterance."""
    return 100.0 / (1.0 + math.exp(-(snr_db - 3.0 - 0.25 * (mean_hl_db - 20.0)) / 4.0))


def listener_profiles():
    profiles = []
    for listener_id, thresholds in LISTENERS:
        left = Audiogram(tuple(float(t) for t in thresholds))
        right = Audiogram(tuple(float(t) + 5.0 for t in thresholds))
        profiles.append(ListenerProfile(listener_id, left, right))
    return profiles


def harmonic_complex(rng, num_samples):
    t = np.arange(num_samples) / SAMPLE_RATE_HZ
    f0 = rng.uniform(110.0, 240.0)
    tone = np.zeros(num_samples)
    for k in range(1, int(4000.0 // f0) + 1):
        tone += np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi)) / k
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * 4.0 * t + rng.uniform(0, 2 * np.pi))
    return tone * envelope


def mix_at_snr(rng, clean, snr_db):
    noise = rng.standard_normal(clean.size)
    gain = np.sqrt(np.mean(clean ** 2) / (np.mean(noise ** 2) * 10.0 ** (snr_db / 10.0)))
    return clean + gain * noise


def write_synthetic_corpus(out_dir, n_train=8, n_dev=2, n_test=2, seed=0):
    """
    Write WAVs, ``manifest.csv`` and ``audiograms.json`` under ``out_dir``.

    Test rows keep their labels so predictions can be scored.

    Returns:
        dict with 'manifest' and 'audiograms' paths and the written records
    """
    out_dir = Path(out_dir)
    audio_dir = out_dir / 'audio'
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    profiles = listener_profiles()
    num_samples = int(DURATION_S * SAMPLE_RATE_HZ)
    splits = ['train'] * n_train + ['dev'] * n_dev + ['test'] * n_test

    records = []
    for index, split in enumerate(splits):
        utterance_id = f"syn_{index:03d}"
        profile = profiles[index % len(profiles)]
        snr = rng.uniform(*SNR_RANGE_DB)
        ear_snr = snr + rng.uniform(-EAR_SNR_SPREAD_DB, EAR_SNR_SPREAD_DB, size=2)

        clean = harmonic_complex(rng, num_samples)
        channels = [mix_at_snr(rng, clean, s) for s in ear_snr]
        peak = max(np.max(np.abs(c)) for c in channels)
        left, right = (PEAK * c / peak for c in channels)
        wav_rel = Path('audio') / f"{utterance_id}.wav"
        write_wav(BinauralSignal(SAMPLE_RATE_HZ, left, right), out_dir / wav_rel)

        mean_hl = (profile.left.mean_threshold() + profile.right.mean_threshold()) / 2.0
        label = round(intelligibility_label(float(np.mean(ear_snr)), mean_hl), 2)
        records.append(UtteranceRecord(utterance_id, wav_rel, profile.listener_id, label, split))

    manifest = out_dir / 'manifest.csv'
    audiograms = out_dir / 'audiograms.json'
    write_manifest(records, manifest)
    write_audiograms(profiles, audiograms)
    logger.info("Wrote %d synthetic utterances to %s", len(records), out_dir)
    return {'manifest': manifest, 'audiograms': audiograms, 'records': records}
