"""
Domain records for binscore
"""
from .audiogram import FREQUENCIES_HZ, Audiogram, ListenerProfile
from .signal import BinauralSignal, MonoSignal
from .utterance import SPLITS, UtteranceRecord
from .feature_bundle import (
    MIN_BAND_HZ,
    MIN_LOW_HZ,
    FeatureBundle,
    LFBFeatures,
    LFBParams,
    SpectralFeatures,
    SSLFeatures,
)
from .scores import (
    AVERAGE_FUSION,
    SCORE_SCALE,
    FrameScores,
    FusionWeights,
    LossWeights,
    UtteranceScore,
)
from .prediction import MetricReport, PredictionRecord

__all__ = [
    'FREQUENCIES_HZ',
    'Audiogram',
    'ListenerProfile',
    'BinauralSignal',
    'MonoSignal',
    'SPLITS',
    'UtteranceRecord',
    'MIN_BAND_HZ',
    'MIN_LOW_HZ',
    'FeatureBundle',
    'LFBFeatures',
    'LFBParams',
    'SpectralFeatures',
    'SSLFeatures',
    'AVERAGE_FUSION',
    'SCORE_SCALE',
    'FrameScores',
    'FusionWeights',
    'LossWeights',
    'UtteranceScore',
    'MetricReport',
    'PredictionRecord',
]
