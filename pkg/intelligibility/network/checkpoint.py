"""
Checkpoint files.

A checkpoint is a multi-tensor container (see features/container.py): the
JSON header carries the metadata below plus the tensor index, followed by
every state-dict tensor as little-endian float32.

Metadata keys: format, kind, fusion_mode, provider, ssl_dim, seed,
label_scale, feature_config, model_config.
"""
import logging

import numpy as np
import torch

from intelligibility.config import config_to_dict, feature_config_from_dict, model_config_from_dict
from intelligibility.exceptions import CheckpointError, FeatureError, ValidationError
from intelligibility.features.container import read_tensors, write_tensors
from intelligibility.models import SCORE_SCALE
from intelligibility.network.predictor import KINDS, build_predictor

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'binscore-checkpoint-1'

REQUIRED_KEYS = ('kind', 'provider', 'ssl_dim', 'feature_config', 'model_config')


def checkpoint_metadata(model, feature_cfg, model_cfg, ssl_dim, provider, seed):
    return {
        'format': CHECKPOINT_FORMAT,
        'kind': model.kind,
        'fusion_mode': model.fusion_mode,
        'provider': provider,
        'ssl_dim': int(ssl_dim),
        'seed': int(seed),
        'label_scale': SCORE_SCALE,
        'feature_config': config_to_dict(feature_cfg),
        'model_config': config_to_dict(model_cfg),
    }


def save_checkpoint(path, model, metadata, state_dict=None):
    """
    Write ``model`` (or an explicit ``state_dict``) with its metadata.

    Tensors are stored as float32; parameters of a float32 model round-trip
    exactly.
    """
    state = model.state_dict() if state_dict is None else state_dict
    tensors = [(name, value.detach().cpu().numpy()) for name, value in state.items()]
    write_tensors(path, tensors, **metadata)
    logger.debug("Wrote checkpoint %s (%d tensors)", path, len(tensors))


def load_checkpoint(path):
    """
    Rebuild a predictor from a checkpoint.

    Returns:
        (model in eval mode, metadata dict)

    Raises:
        CheckpointError: Unreadable file, unknown format or kind, missing
            metadata, or any tensor whose name or shape does not match the
            architecture the metadata declares
    """
    try:
        header, tensors = read_tensors(path)
    except (FeatureError, OSError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}")

    if header.get('format') != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a binscore checkpoint")
    missing = [key for key in REQUIRED_KEYS if key not in header]
    if missing:
        raise CheckpointError(f"{path}: metadata lacks {', '.join(missing)}")
    if header['kind'] not in KINDS:
        raise CheckpointError(f"{path}: unknown model kind '{header['kind']}'")

    try:
        feature_cfg = feature_config_from_dict(header['feature_config'])
        model_cfg = model_config_from_dict(header['model_config'])
        model = build_predictor(
            header['kind'], feature_cfg, model_cfg, header['ssl_dim'], header.get('fusion_mode') or 'linear'
        )
    except (ValidationError, TypeError, KeyError) as e:
        raise CheckpointError(f"{path}: invalid metadata: {e}")

    expected = model.state_dict()
    unexpected = sorted(set(tensors) - set(expected))
    absent = sorted(set(expected) - set(tensors))
    if unexpected or absent:
        raise CheckpointError(
            f"{path}: tensors do not match the declared architecture "
            f"(missing: {', '.join(absent) or 'none'}; unexpected: {', '.join(unexpected) or 'none'})"
        )
    state = {}
    for name, reference in expected.items():
        array = tensors[name]
        if tuple(array.shape) != tuple(reference.shape):
            raise CheckpointError(
                f"{path}: tensor {name} has shape {tuple(array.shape)}, expected {tuple(reference.shape)}"
            )
        if not np.all(np.isfinite(array)):
            raise CheckpointError(f"{path}: tensor {name} contains non-finite values")
        state[name] = torch.from_numpy(array.copy()).to(reference.dtype)
    model.load_state_dict(state)
    model.eval()
    return model, header
