"""
Exceptions raised by the intelligibility application.

ValidationError and its subclasses describe bad user input (the CLI maps
them to exit code 2); everything else derived from BinscoreError is a
runtime failure (exit code 3).
"""


class BinscoreError(Exception):
    """Base class for all binscore failures"""
    pass


class ValidationError(BinscoreError):
    """Raised when user-supplied data violates a documented invariant"""
    pass


class ManifestError(ValidationError):
    """Raised when a manifest CSV is missing or malformed"""
    pass


class AudiogramError(ValidationError):
    """Raised when an audiogram or listener profile is invalid"""
    pass


class AudioFormatError(ValidationError):
    """Raised when a WAV file cannot be used as binaural input"""
    pass


class ConfigError(ValidationError):
    """Raised for invalid configuration values or unknown config keys"""
    pass


class CheckpointError(ValidationError):
    """Raised when a checkpoint is malformed or does not match its config"""
    pass


class ProviderError(ValidationError):
    """Raised for unknown embedding providers or provider mismatches"""
    pass


class FeatureError(BinscoreError):
    """
    Raised when features cannot be extracted.

    ``missing`` carries every missing archive key when the failure comes
    from a precomputed embedding archive.
    """

    def __init__(self, message, missing=None):
        super().__init__(message)
        self.missing = list(missing or [])


class MetricError(BinscoreError):
    """Raised when a metric is undefined for the given prediction set"""
    pass


class TrainingDivergedError(BinscoreError):
    """Raised when the training objective becomes non-finite"""
    pass
