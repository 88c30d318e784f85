"""
Embedding providers for the encoder-representation feature stream.

Providers are looked up by name in a registry. Bundled providers:

    precomputed - reads ``<utterance_id>.<branch>.emb`` files from an archive
    mel-proxy   - 40-band log-mel filterbank, for tests and desk-scale runs
    hubert      - final hidden layer of a pretrained HuBERT encoder
    wavlm       - final hidden layer of a pretrained WavLM encoder

All providers expect 16 kHz input.
"""
import logging
import threading
from abc import ABC, abstractmethod
from pathlib import Path

import librosa
import numpy as np
from scipy import signal as sps

from binscore import settings
from intelligibility.exceptions import FeatureError, ProviderError
from intelligibility.features.container import read_embedding
from intelligibility.features.spectral import LOG_EPS, frame_signal
from intelligibility.models import MonoSignal, SSLFeatures

logger = logging.getLogger(__name__)

EMBEDDING_RATE_HZ = 16000

PROVIDERS = {}


def register_provider(name):
    """Class decorator adding a provider to the registry under ``name``."""
    def decorator(cls):
        PROVIDERS[name] = cls
        cls.name = name
        return cls
    return decorator


def available_providers():
    return sorted(PROVIDERS)


def create_provider(name, **options):
    """
    Instantiate a registered provider.

    Raises:
        ProviderError: Unknown provider name (message lists registered names)
    """
    cls = PROVIDERS.get(name)
    if cls is None:
        raise ProviderError(
            f"unknown provider '{name}'; registered providers: {', '.join(available_providers())}"
        )
    return cls(**options)


class EmbeddingProvider(ABC):
    """Maps a 16 kHz signal to a frames x dim representation matrix."""
    name = 'abstract'
    sample_rate_hz = EMBEDDING_RATE_HZ
    frame_rate_hz = 50.0

    @abstractmethod
    def embed(self, sig: MonoSignal, utterance_id=None, branch=None) -> SSLFeatures:
        ...

    def missing_entries(self, keys):
        """(utterance_id, branch) keys this provider cannot serve."""
        return []


def get_embeddings(provider: EmbeddingProvider, sig: MonoSignal, utterance_id=None, branch=None) -> SSLFeatures:
    """
    Embed ``sig`` with ``provider``.

    Raises:
        FeatureError: Signal rate differs from the provider's expected rate,
            or the provider has no entry for the utterance
    """
    if sig.sample_rate_hz != provider.sample_rate_hz:
        raise FeatureError(
            f"rate mismatch: provider '{provider.name}' expects {provider.sample_rate_hz} Hz, "
            f"got {sig.sample_rate_hz} Hz"
        )
    return provider.embed(sig, utterance_id=utterance_id, branch=branch)


@register_provider('mel-proxy')
class MelProxyProvider(EmbeddingProvider):
    """
    Log-mel filterbank standing in for a pretrained encoder.

    25 ms Hann window, 20 ms hop, 512-point FFT, 40 mel bands.
    """
    window = 400
    hop = 320
    n_fft = 512
    n_mels = 40

    def __init__(self):
        self.frame_rate_hz = self.sample_rate_hz / self.hop
        self._mel_basis = librosa.filters.mel(sr=self.sample_rate_hz, n_fft=self.n_fft, n_mels=self.n_mels)
        self._window = sps.get_window('hann', self.window)

    @property
    def dim(self):
        return self.n_mels

    def embed(self, sig, utterance_id=None, branch=None):
        frames = frame_signal(sig.samples, self.window, self.hop) * self._window
        power = np.abs(np.fft.rfft(frames, n=self.n_fft, axis=1)) ** 2
        mel = power @ self._mel_basis.T
        return SSLFeatures(np.log(mel + LOG_EPS), self.frame_rate_hz, self.name)


@register_provider('precomputed')
class PrecomputedProvider(EmbeddingProvider):
    """
    Reads stored matrices from an embedding archive directory.

    The archive holds one ``<utterance_id>.<branch>.emb`` file per utterance
    and branch; it is only read, never written.
    """

    def __init__(self, archive_dir=None):
        archive_dir = archive_dir or settings.EMBEDDING_ARCHIVE
        if not archive_dir:
            raise ProviderError("the precomputed provider needs an embedding archive directory")
        self.archive_dir = Path(archive_dir)
        if not self.archive_dir.is_dir():
            raise ProviderError(f"embedding archive not found: {self.archive_dir}")

    def entry_path(self, utterance_id, branch):
        return self.archive_dir / f"{utterance_id}.{branch}.emb"

    def missing_entries(self, keys):
        return [self.entry_path(u, b).name for u, b in keys if not self.entry_path(u, b).is_file()]

    def embed(self, sig, utterance_id=None, branch=None):
        if utterance_id is None or branch is None:
            raise FeatureError("precomputed embeddings are looked up by utterance id and branch")
        path = self.entry_path(utterance_id, branch)
        if not path.is_file():
            raise FeatureError(f"missing archive entry: {path.name}", missing=[path.name])
        matrix, header = read_embedding(path)
        frame_rate = float(header.get('frame_rate_hz', self.frame_rate_hz))
        return SSLFeatures(matrix.astype(np.float64), frame_rate, str(header.get('provider_id', self.name)))


class TransformersProvider(EmbeddingProvider):
    """
    Runs a pretrained speech encoder from ``transformers`` in inference mode.

    The model is loaded once, on first use, even when several extraction
    workers share the provider; the final hidden layer is returned.
    """
    model_name = None

    def __init__(self, model_name=None):
        self.model_name = model_name or self.model_name
        self._extractor = None
        self._model = None
        self._lock = threading.Lock()

    def _load(self):
        if self._model is not None:
            return
        with self._lock:
            if self._model is not None:
                return
            try:
                from transformers import AutoFeatureExtractor, AutoModel
            except ImportError:
                raise ProviderError(f"provider '{self.name}' requires the 'transformers' package")
            logger.info("Loading encoder %s", self.model_name)
            self._extractor = AutoFeatureExtractor.from_pretrained(self.model_name)
            self._model = AutoModel.from_pretrained(self.model_name).eval()

    @property
    def dim(self):
        self._load()
        return self._model.config.hidden_size

    def embed(self, sig, utterance_id=None, branch=None):
        import torch

        self._load()
        inputs = self._extractor(
            sig.samples.astype(np.float32),
            sampling_rate=self.sample_rate_hz,
            return_tensors='pt',
        )
        with torch.no_grad():
            hidden = self._model(**inputs).last_hidden_state[0]
        return SSLFeatures(hidden.double().numpy(), self.frame_rate_hz, f"{self.name}:{self.model_name}")


@register_provider('hubert')
class HubertProvider(TransformersProvider):
    model_name = settings.HUBERT_MODEL


@register_provider('wavlm')
class WavLMProvider(TransformersProvider):
    model_name = settings.WAVLM_MODEL
