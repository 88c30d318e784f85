"""
Corpus ingestion: manifests, listener audiograms and binaural WAV files.

File formats:
    - Manifest CSV with header ``utterance_id,wav_path,listener_id,correctness,split``
      (correctness may be empty on test rows).
    - Audiogram JSON ``{"listeners": [{"listener_id", "left": [8], "right": [8]}]}``.
    - RIFF PCM WAV, 16- or 24-bit, any rate, exactly two channels.
"""
import csv
import json
import logging
from math import gcd
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

import numpy as np
import soundfile as sf
from scipy import signal as sps

from intelligibility.exceptions import (
    AudioFormatError,
    AudiogramError,
    ManifestError,
    ValidationError,
)
from intelligibility.models import (
    Audiogram,
    BinauralSignal,
    ListenerProfile,
    MonoSignal,
    UtteranceRecord,
)

logger = logging.getLogger(__name__)

MANIFEST_FIELDS = ['utterance_id', 'wav_path', 'listener_id', 'correctness', 'split']

# Bit depth of each accepted WAV subtype.
PCM_SUBTYPES = {'PCM_16': 16, 'PCM_24': 24}


def load_manifest(path) -> List[UtteranceRecord]:
    """
    Read a manifest CSV into validated records.

    Args:
        path: Manifest file path

    Returns:
        One UtteranceRecord per data row, in file order

    Raises:
        ManifestError: Missing file, wrong header, malformed row (the message
            names the file line), score out of range, or duplicate utterance_id
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")

    records = []
    seen = {}
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_FIELDS:
            raise ManifestError(
                f"{path}: header must be '{','.join(MANIFEST_FIELDS)}', got '{','.join(header or [])}'"
            )

        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(MANIFEST_FIELDS):
                raise ManifestError(
                    f"{path}: row {line}: expected {len(MANIFEST_FIELDS)} columns, got {len(row)}"
                )
            utterance_id, wav_path, listener_id, correctness, split = (cell.strip() for cell in row)

            score = None
            if correctness:
                try:
                    score = float(correctness)
                except ValueError:
                    raise ManifestError(f"{path}: row {line}: correctness '{correctness}' is not a number")

            try:
                record = UtteranceRecord(utterance_id, Path(wav_path), listener_id, score, split)
            except ManifestError as e:
                raise ManifestError(f"{path}: row {line}: {e}")

            if utterance_id in seen:
                raise ManifestError(
                    f"{path}: row {line}: duplicate utterance_id '{utterance_id}' (first seen on row {seen[utterance_id]})"
                )
            seen[utterance_id] = line
            records.append(record)

    logger.debug("Loaded %d manifest rows from %s", len(records), path)
    return records


def write_manifest(records: Iterable[UtteranceRecord], path):
    """Write records in the manifest CSV format (inverse of load_manifest)."""
    path = Path(path)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(MANIFEST_FIELDS)
        for record in records:
            writer.writerow([
                record.utterance_id,
                record.wav_path.as_posix(),
                record.listener_id,
                '' if record.correctness is None else repr(record.correctness),
                record.split,
            ])


def resolve_audio_path(manifest_path, record: UtteranceRecord) -> Path:
    """Relative wav paths are taken relative to the manifest's directory."""
    if record.wav_path.is_absolute():
        return record.wav_path
    return Path(manifest_path).parent / record.wav_path


def load_audiograms(path) -> Dict[str, ListenerProfile]:
    """
    Read listener audiograms from the audiogram JSON format.

    Args:
        path: JSON file path

    Returns:
        Mapping listener_id -> ListenerProfile

    Raises:
        AudiogramError: Malformed document, wrong threshold count, threshold
            outside [-10, 120] dB HL, or duplicate listener id
    """
    path = Path(path)
    if not path.is_file():
        raise AudiogramError(f"audiogram file not found: {path}")
    try:
        document = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise AudiogramError(f"{path}: invalid JSON: {e}")

    entries = document.get('listeners') if isinstance(document, dict) else None
    if not isinstance(entries, list):
        raise AudiogramError(f"{path}: expected an object with a 'listeners' list")

    profiles = {}
    for index, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise AudiogramError(f"{path}: listeners[{index}] is not an object")
        listener_id = str(entry.get('listener_id', '')).strip()
        if listener_id in profiles:
            raise AudiogramError(f"{path}: duplicate listener id '{listener_id}'")
        ears = {}
        for side in ('left', 'right'):
            values = entry.get(side)
            if not isinstance(values, list):
                raise AudiogramError(f"{path}: listener '{listener_id}' has no '{side}' threshold list")
            try:
                ears[side] = Audiogram(tuple(values))
            except (AudiogramError, TypeError, ValueError) as e:
                raise AudiogramError(f"{path}: listener '{listener_id}' {side}: {e}")
        profiles[listener_id] = ListenerProfile(listener_id, ears['left'], ears['right'])

    logger.debug("Loaded %d listener profiles from %s", len(profiles), path)
    return profiles


def write_audiograms(profiles: Iterable[ListenerProfile], path):
    """Write profiles in the audiogram JSON format (inverse of load_audiograms)."""
    document = {
        'listeners': [
            {
                'listener_id': p.listener_id,
                'left': list(p.left.thresholds_db_hl),
                'right': list(p.right.thresholds_db_hl),
            }
            for p in profiles
        ]
    }
    Path(path).write_text(json.dumps(document, indent=2) + '\n', encoding='utf-8')


def check_listeners(records: Iterable[UtteranceRecord], profiles: Dict[str, ListenerProfile]):
    """
    Ensure every record's listener has a profile.

    Raises:
        AudiogramError: Listing every unknown listener id
    """
    unknown = sorted({r.listener_id for r in records if r.listener_id not in profiles})
    if unknown:
        raise AudiogramError(f"unknown listener id(s): {', '.join(unknown)}")


def load_binaural_wav(path) -> BinauralSignal:
    """
    Decode a two-channel PCM WAV file.

    Samples are scaled by 2^(bits-1), so the 16-bit value 32767 becomes
    32767/32768.

    Raises:
        AudioFormatError: Missing file, channel count other than 2,
            unsupported encoding, or zero-length audio
    """
    path = Path(path)
    if not path.is_file():
        raise AudioFormatError(f"audio file not found: {path}")
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise AudioFormatError(f"{path}: unreadable audio: {e}")

    if info.channels != 2:
        raise AudioFormatError(f"{path}: expected 2 channels, got {info.channels}")
    if info.subtype not in PCM_SUBTYPES:
        raise AudioFormatError(
            f"{path}: unsupported encoding {info.subtype}, expected 16- or 24-bit PCM"
        )
    if info.frames == 0:
        raise AudioFormatError(f"{path}: zero-length audio")

    # libsndfile left-aligns PCM in int32, so dividing by 2^31 equals
    # dividing the raw sample by 2^(bits-1).
    data, rate = sf.read(str(path), dtype='int32', always_2d=True)
    samples = data.astype(np.float64) / 2.0 ** 31
    return BinauralSignal(rate, samples[:, 0], samples[:, 1])


def write_wav(sig, path):
    """Write a MonoSignal or BinauralSignal as 16-bit PCM."""
    if isinstance(sig, BinauralSignal):
        data = np.stack([sig.left, sig.right], axis=1)
    elif isinstance(sig, MonoSignal):
        data = sig.samples
    else:
        raise ValidationError(f"cannot write {type(sig).__name__} as audio")
    sf.write(str(path), data, sig.sample_rate_hz, subtype='PCM_16')


def split_channels(sig: BinauralSignal) -> Tuple[MonoSignal, MonoSignal]:
    """Return (left, right) mono signals; the first channel is the left ear."""
    return (
        MonoSignal(sig.sample_rate_hz, sig.left.copy()),
        MonoSignal(sig.sample_rate_hz, sig.right.copy()),
    )


def merge_channels(left: MonoSignal, right: MonoSignal) -> BinauralSignal:
    """Inverse of split_channels."""
    if left.sample_rate_hz != right.sample_rate_hz:
        raise AudioFormatError(
            f"sample rates differ: left={left.sample_rate_hz}, right={right.sample_rate_hz}"
        )
    return BinauralSignal(left.sample_rate_hz, left.samples.copy(), right.samples.copy())


def resample(sig: MonoSignal, target_rate_hz: int) -> MonoSignal:
    """
    Band-limited polyphase resampling.

    The output has round(len * target / source) samples; matching rates
    return the input samples unchanged.

    Raises:
        ValidationError: target rate <= 0
    """
    target_rate_hz = int(target_rate_hz)
    if target_rate_hz <= 0:
        raise ValidationError(f"target rate must be positive, got {target_rate_hz}")
    source_rate_hz = sig.sample_rate_hz
    if target_rate_hz == source_rate_hz:
        return MonoSignal(source_rate_hz, sig.samples.copy())

    divisor = gcd(target_rate_hz, source_rate_hz)
    up, down = target_rate_hz // divisor, source_rate_hz // divisor
    n = sig.samples.size
    out_len = max(1, (2 * n * target_rate_hz + source_rate_hz) // (2 * source_rate_hz))

    out = sps.resample_poly(sig.samples, up, down)
    if out.size >= out_len:
        out = out[:out_len]
    else:
        out = np.pad(out, (0, out_len - out.size))
    clipped = int(np.count_nonzero(np.abs(out) > 1.0))
    if clipped:
        logger.warning(
            "Resampling %d -> %d Hz clipped %d sample(s) outside [-1, 1]",
            source_rate_hz, target_rate_hz, clipped,
        )
    return MonoSignal(target_rate_hz, np.clip(out, -1.0, 1.0))
