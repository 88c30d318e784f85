"""
Feature streams of one branch: STFT spectra, learnable filter-bank energies
and encoder representations, aligned onto a common frame grid.

Bundle extraction and caching live in ``intelligibility.features.extraction``.
"""
from .alignment import align_features
from .embeddings import EmbeddingProvider, available_providers, create_provider, get_embeddings
from .lfb import SincFilterBank, lfb_features, lfb_gradient, mel_initialized_params
from .spectral import LOG_EPS, frame_segments, stft_features

__all__ = [
    'align_features',
    'EmbeddingProvider',
    'available_providers',
    'create_provider',
    'get_embeddings',
    'SincFilterBank',
    'lfb_features',
    'lfb_gradient',
    'mel_initialized_params',
    'LOG_EPS',
    'frame_segments',
    'stft_features',
]
