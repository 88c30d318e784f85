"""
Per-utterance feature extraction and the on-disk bundle cache.

Each branch of an utterance is stored as ``<utterance_id>.<branch>.bundle``
in the binary tensor container, holding the ``spectral``, ``lfb``, ``ssl``
and ``segments`` streams plus a fingerprint of everything that produced it.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from tqdm import tqdm

from intelligibility.corpus import load_binaural_wav, resample, resolve_audio_path, split_channels
from intelligibility.exceptions import FeatureError
from intelligibility.features.alignment import align_features
from intelligibility.features.container import read_header, read_tensors, write_tensors
from intelligibility.features.embeddings import get_embeddings
from intelligibility.features.lfb import lfb_features
from intelligibility.features.spectral import frame_segments, stft_features
from intelligibility.hearing_loss import HearingLossConfig, apply_hearing_loss
from intelligibility.models import FeatureBundle, LFBFeatures, SpectralFeatures, SSLFeatures

logger = logging.getLogger(__name__)

EAR_BRANCHES = ('left', 'right')
BUNDLE_SUFFIX = '.bundle'


def extract_branch(sig, ag, provider, cfg, utterance_id=None, branch=None) -> FeatureBundle:
    """
    Features of one ear as heard by the listener.

    Hearing loss is simulated at the recording's native rate; the processed
    signal is then resampled to the working rate for the spectral and
    filter-bank streams and to the provider's rate for the embeddings.

    Args:
        sig: MonoSignal of one ear
        ag: Audiogram of that ear
        provider: EmbeddingProvider
        cfg: FeatureConfig
        utterance_id: Archive key for precomputed providers
        branch: 'left' or 'right'
    """
    heard = apply_hearing_loss(sig, ag, HearingLossConfig.for_sample_rate(sig.sample_rate_hz, cfg.smearing))
    working = resample(heard, cfg.sample_rate_hz)

    spectral = stft_features(working, cfg.stft_window, cfg.stft_hop)
    lfb = lfb_features(working, cfg.initial_lfb_params(), cfg.stft_hop, cfg.stft_window)
    segments = frame_segments(working.samples, cfg.stft_window, cfg.stft_hop, cfg.lfb_kernel_len)

    embed_input = working if provider.sample_rate_hz == working.sample_rate_hz else resample(heard, provider.sample_rate_hz)
    ssl = get_embeddings(provider, embed_input, utterance_id=utterance_id, branch=branch)
    return align_features(spectral, lfb, ssl, segments=segments, utterance_id=utterance_id, branch=branch)


def extract_utterance(record, manifest_path, profiles, provider, cfg, branches=EAR_BRANCHES):
    """
    Bundles for the requested branches of one manifest row.

    Returns:
        dict branch -> FeatureBundle
    """
    sig = load_binaural_wav(resolve_audio_path(manifest_path, record))
    channels = dict(zip(EAR_BRANCHES, split_channels(sig)))
    profile = profiles[record.listener_id]
    return {
        branch: extract_branch(channels[branch], profile.ear(branch), provider, cfg, record.utterance_id, branch)
        for branch in branches
    }


def bundle_path(out_dir, utterance_id, branch):
    return Path(out_dir) / f"{utterance_id}.{branch}{BUNDLE_SUFFIX}"


def bundle_fingerprint(provider, cfg, ag):
    """Inputs that determine a bundle besides the audio file itself."""
    return {
        'provider': provider.name,
        'provider_model': getattr(provider, 'model_name', None),
        'features': {
            'sample_rate_hz': cfg.sample_rate_hz,
            'stft_window': cfg.stft_window,
            'stft_hop': cfg.stft_hop,
            'lfb_filters': cfg.lfb_filters,
            'lfb_kernel_len': cfg.lfb_kernel_len,
            'smearing': cfg.smearing,
        },
        'audiogram': list(ag.thresholds_db_hl),
    }


def write_bundle(path, bundle: FeatureBundle, **metadata):
    tensors = [
        ('spectral', bundle.spectral.frames),
        ('lfb', bundle.lfb.frames),
        ('ssl', bundle.ssl.frames),
    ]
    if bundle.segments is not None:
        tensors.append(('segments', bundle.segments))
    write_tensors(
        path,
        tensors,
        utterance_id=bundle.utterance_id,
        branch=bundle.branch,
        frame_rate_hz=bundle.spectral.frame_rate_hz,
        provider_id=bundle.ssl.provider_id,
        **metadata,
    )


def read_bundle(path) -> FeatureBundle:
    """
    Raises:
        FeatureError: Missing file, corrupt container or missing streams
    """
    path = Path(path)
    if not path.is_file():
        raise FeatureError(f"feature bundle not found: {path}", missing=[path.name])
    header, tensors = read_tensors(path)
    missing = [name for name in ('spectral', 'lfb', 'ssl') if name not in tensors]
    if missing:
        raise FeatureError(f"{path}: bundle lacks streams: {', '.join(missing)}")
    rate = float(header.get('frame_rate_hz', 0.0))
    return FeatureBundle(
        SpectralFeatures(tensors['spectral'], rate),
        LFBFeatures(tensors['lfb'], rate),
        SSLFeatures(tensors['ssl'], rate, str(header.get('provider_id', ''))),
        segments=tensors.get('segments'),
        utterance_id=header.get('utterance_id'),
        branch=header.get('branch'),
    )


def is_up_to_date(path, source, fingerprint):
    """True when ``path`` exists, is newer than ``source`` and carries ``fingerprint``."""
    path = Path(path)
    if not path.is_file():
        return False
    if os.path.getmtime(path) < os.path.getmtime(source):
        return False
    try:
        return read_header(path).get('fingerprint') == fingerprint
    except (FeatureError, OSError):
        return False


def check_archive(records, provider, branches=EAR_BRANCHES):
    """
    Raises:
        FeatureError: Listing every archive entry the provider cannot serve
    """
    keys = [(r.utterance_id, b) for r in records for b in branches]
    missing = provider.missing_entries(keys)
    if missing:
        raise FeatureError(
            f"{len(missing)} embedding archive entr{'y is' if len(missing) == 1 else 'ies are'} missing: "
            + ', '.join(missing),
            missing=missing,
        )


def extract_corpus(records, manifest_path, profiles, provider, cfg, out_dir, force=False, workers=1,
                   branches=EAR_BRANCHES):
    """
    Write bundle files for every record, skipping up-to-date ones.

    Args:
        records: UtteranceRecords to process
        manifest_path: Manifest the records came from (relative wav paths)
        profiles: listener_id -> ListenerProfile
        provider: EmbeddingProvider
        cfg: FeatureConfig
        out_dir: Bundle directory (created if needed)
        force: Rewrite bundles even when up to date
        workers: Thread pool size

    Returns:
        dict with 'written' and 'skipped' counts

    Raises:
        FeatureError: Missing archive entries (all listed before any work)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    check_archive(records, provider, branches)

    pending = []
    skipped = 0
    for record in records:
        wav = resolve_audio_path(manifest_path, record)
        profile = profiles[record.listener_id]
        stale = [
            b for b in branches
            if force or not is_up_to_date(
                bundle_path(out_dir, record.utterance_id, b), wav,
                bundle_fingerprint(provider, cfg, profile.ear(b)),
            )
        ]
        skipped += len(branches) - len(stale)
        if stale:
            pending.append((record, stale))

    def work(item):
        record, stale = item
        profile = profiles[record.listener_id]
        bundles = extract_utterance(record, manifest_path, profiles, provider, cfg, stale)
        for branch, bundle in bundles.items():
            write_bundle(
                bundle_path(out_dir, record.utterance_id, branch),
                bundle,
                fingerprint=bundle_fingerprint(provider, cfg, profile.ear(branch)),
            )
        return len(bundles)

    written = 0
    if pending:
        with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
            for count in tqdm(pool.map(work, pending), total=len(pending), desc='features', unit='utt',
                              disable=not logger.isEnabledFor(logging.INFO)):
                written += count

    logger.info("Feature bundles: %d written, %d up to date", written, skipped)
    return {'written': written, 'skipped': skipped}


def load_feature_set(records, feature_dir, branches=EAR_BRANCHES):
    """
    Read cached bundles for every record.

    Returns:
        dict utterance_id -> dict branch -> FeatureBundle

    Raises:
        FeatureError: Listing every missing bundle file
    """
    missing = [
        bundle_path(feature_dir, r.utterance_id, b).name
        for r in records for b in branches
        if not bundle_path(feature_dir, r.utterance_id, b).is_file()
    ]
    if missing:
        raise FeatureError(f"missing feature bundles: {', '.join(missing)}", missing=missing)
    return {
        r.utterance_id: {b: read_bundle(bundle_path(feature_dir, r.utterance_id, b)) for b in branches}
        for r in records
    }


def compute_feature_set(records, manifest_path, profiles, provider, cfg, branches=EAR_BRANCHES):
    """In-memory counterpart of extract_corpus + load_feature_set."""
    check_archive(records, provider, branches)
    return {
        r.utterance_id: extract_utterance(r, manifest_path, profiles, provider, cfg, branches)
        for r in tqdm(records, desc='features', unit='utt', disable=not logger.isEnabledFor(logging.INFO))
    }
