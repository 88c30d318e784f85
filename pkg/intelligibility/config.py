"""
Run configuration: feature, model and training settings.

Settings live in an INI file with ``[features]``, ``[model]`` and ``[train]``
sections whose keys are the dataclass field names below. Unknown sections
or keys are rejected. Lists are comma separated::

    [train]
    fusion_mode = average
    loss_weights = 1.0, 1.0, 1.0
    optimizer = adam

    [model]
    cnn_channels = 16, 32, 64, 128
"""
import configparser
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

from binscore import settings
from intelligibility.exceptions import ConfigError, FeatureError, ValidationError
from intelligibility.features.lfb import mel_initialized_params
from intelligibility.features.spectral import check_framing
from intelligibility.models import LossWeights

logger = logging.getLogger(__name__)

FUSION_MODES = ('linear', 'average')
OPTIMIZERS = ('sgd', 'adam')
OPTIMIZER_ALIASES = {'adaptive-moment': 'adam'}


@dataclass(frozen=True)
class FeatureConfig:
    """Feature extraction settings; the working rate is 16 kHz."""
    sample_rate_hz: int = 16000
    stft_window: int = 512
    stft_hop: int = 256
    lfb_filters: int = 64
    lfb_kernel_len: int = 251
    smearing: bool = False

    def __post_init__(self):
        try:
            check_framing(self.stft_window, self.stft_hop)
        except FeatureError as e:
            raise ConfigError(f"[features] {e}")
        if self.sample_rate_hz <= 0:
            raise ConfigError("[features] sample_rate_hz must be positive")
        if self.lfb_filters < 1:
            raise ConfigError("[features] lfb_filters must be positive")
        if self.lfb_kernel_len < 1 or self.lfb_kernel_len % 2 == 0:
            raise ConfigError("[features] lfb_kernel_len must be odd and positive")

    @property
    def spectral_bins(self):
        return self.stft_window // 2 + 1

    @property
    def segment_width(self):
        return self.stft_window + self.lfb_kernel_len - 1

    def initial_lfb_params(self):
        return mel_initialized_params(self.lfb_filters, self.lfb_kernel_len, self.sample_rate_hz)


@dataclass(frozen=True)
class ModelConfig:
    """Layer sizes of one branch."""
    cnn_channels: Tuple[int, ...] = (16, 32, 64, 128)
    freq_stride: int = 3
    d_model: int = 256
    lstm_hidden: int = 128

    def __post_init__(self):
        channels = tuple(int(c) for c in self.cnn_channels)
        if not channels or min(channels) < 1:
            raise ConfigError("[model] cnn_channels must be positive integers")
        object.__setattr__(self, 'cnn_channels', channels)
        for name in ('freq_stride', 'd_model', 'lstm_hidden'):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"[model] {name} must be positive")

    @property
    def attention_dim(self):
        return 2 * self.lstm_hidden


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings of a training run."""
    fusion_mode: str = 'linear'
    loss_weights: LossWeights = field(default_factory=LossWeights)
    batch_size: int = 4
    max_epochs: int = 200
    learning_rate: float = 1e-3
    seed: int = field(default_factory=lambda: settings.SEED)
    optimizer: str = 'adam'
    early_stop_patience: int = 20
    dev_fraction: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, 'optimizer', OPTIMIZER_ALIASES.get(self.optimizer, self.optimizer))
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(f"[train] fusion_mode must be one of {', '.join(FUSION_MODES)}, got '{self.fusion_mode}'")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"[train] optimizer must be one of {', '.join(OPTIMIZERS)}, got '{self.optimizer}'")
        if self.batch_size < 1:
            raise ConfigError("[train] batch_size must be positive")
        if self.max_epochs < 1:
            raise ConfigError("[train] max_epochs must be positive")
        if not self.learning_rate >= 0.0:
            raise ConfigError("[train] learning_rate must be nonnegative")
        if self.early_stop_patience < 1:
            raise ConfigError("[train] early_stop_patience must be positive")
        if not 0.0 < self.dev_fraction < 1.0:
            raise ConfigError("[train] dev_fraction must be in (0, 1)")


@dataclass(frozen=True)
class RunConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


SECTIONS = {'features': FeatureConfig, 'model': ModelConfig, 'train': TrainConfig}


def _parse_value(section, key, raw, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(part) for part in raw.split(','))
        if isinstance(default, LossWeights):
            parts = [float(part) for part in raw.split(',')]
            if len(parts) != 3:
                raise ValueError(raw)
            return LossWeights(*parts)
    except ValidationError as e:
        raise ConfigError(f"[{section}] {key}: {e}")
    except ValueError:
        raise ConfigError(f"[{section}] {key}: invalid value '{raw}'")
    return raw


def load_config(path=None, **overrides) -> RunConfig:
    """
    Build a RunConfig from defaults, an optional INI file and overrides.

    Args:
        path: INI file, or None for defaults only
        **overrides: ``section__key=value`` pairs applied after the file
            (command-line flags); None values are ignored

    Raises:
        ConfigError: Missing file, unknown section or key, or invalid value
    """
    values = {name: {} for name in SECTIONS}

    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path, encoding='utf-8')
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}")
        for section in parser.sections():
            cls = SECTIONS.get(section)
            if cls is None:
                raise ConfigError(f"{path}: unknown section [{section}]")
            defaults = cls()
            known = {f.name for f in dataclasses.fields(cls)}
            for key, raw in parser.items(section):
                if key not in known:
                    raise ConfigError(f"{path}: unknown key '{key}' in [{section}]")
                values[section][key] = _parse_value(section, key, raw, getattr(defaults, key))

    for name, value in overrides.items():
        if value is None:
            continue
        section, _, key = name.partition('__')
        if section not in SECTIONS or key not in {f.name for f in dataclasses.fields(SECTIONS[section])}:
            raise ConfigError(f"unknown override '{name}'")
        values[section][key] = value

    built = {}
    for section, cls in SECTIONS.items():
        try:
            built[section] = cls(**values[section])
        except ValidationError as e:
            raise ConfigError(str(e))
    logger.debug("Run configuration: %s", built)
    return RunConfig(**built)


def config_to_dict(cfg):
    """JSON-ready dict of a config dataclass (used in checkpoint metadata)."""
    data = dataclasses.asdict(cfg)
    for key, value in data.items():
        if isinstance(value, tuple):
            data[key] = list(value)
    return data


def feature_config_from_dict(data):
    return FeatureConfig(**data)


def model_config_from_dict(data):
    data = dict(data)
    data['cnn_channels'] = tuple(data['cnn_channels'])
    return ModelConfig(**data)
