"""
Training of binaural and single-branch predictors.

Labels are divided by 100 before training. Every epoch shuffles the training
utterances with a generator seeded by (seed, epoch), so runs with the same
seed visit identical batches.
"""
import copy
import json
import logging
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import torch

from intelligibility.config import FeatureConfig, ModelConfig
from intelligibility.exceptions import FeatureError, TrainingDivergedError, ValidationError
from intelligibility.evaluation import rmse
from intelligibility.models import SCORE_SCALE, PredictionRecord
from intelligibility.network.branch import BranchInputs
from intelligibility.network.checkpoint import checkpoint_metadata, save_checkpoint
from intelligibility.network.predictor import BinauralPredictor, SingleBranchPredictor, predict

logger = logging.getLogger(__name__)


@dataclass
class Batch:
    utterance_ids: List[str]
    inputs: dict
    targets: Optional[torch.Tensor]

    def __len__(self):
        return len(self.utterance_ids)


@dataclass
class TrainReport:
    """Per-epoch history and outcome of a training run."""
    train_loss: List[float] = field(default_factory=list)
    train_rmse: List[float] = field(default_factory=list)
    dev_rmse: List[float] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_rmse: Optional[float] = None
    checkpoint_path: Optional[str] = None
    seed: int = 0
    kind: str = 'binaural'
    fusion_mode: Optional[str] = None
    provider: Optional[str] = None

    def to_dict(self):
        return asdict(self)

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + '\n', encoding='utf-8')


def set_seed(seed):
    """Seed python, numpy and torch and ask torch for deterministic kernels."""
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)


def split_records(records, dev_fraction, seed):
    """
    Training and dev rows.

    Rows marked ``dev`` form the dev set when present; otherwise a
    dev_fraction share of the train rows (at least one) is held out by a
    seeded permutation. Test rows are never used.

    Raises:
        ValidationError: No train rows, or too few to hold out a dev set
    """
    train = [r for r in records if r.split == 'train']
    dev = [r for r in records if r.split == 'dev']
    if not train:
        raise ValidationError("the manifest has no train rows")
    unlabeled = [r.utterance_id for r in train + dev if not r.has_label]
    if unlabeled:
        raise ValidationError(f"train/dev rows without correctness: {', '.join(unlabeled)}")
    if dev:
        return train, dev
    if len(train) < 2:
        raise ValidationError("need at least two train rows to hold out a dev split")
    n_dev = min(len(train) - 1, max(1, int(round(dev_fraction * len(train)))))
    order = np.random.default_rng(seed).permutation(len(train))
    held = set(order[:n_dev].tolist())
    return [r for i, r in enumerate(train) if i not in held], [r for i, r in enumerate(train) if i in held]


def make_batches(records, features, batch_size, seed, epoch=0, branches=('left', 'right'),
                 shuffle=True, dtype=torch.float32):
    """
    Group records into padded batches.

    Args:
        records: UtteranceRecords (labels optional)
        features: utterance_id -> branch -> FeatureBundle
        batch_size: Items per batch; the last batch may be smaller
        seed, epoch: Shuffle key; the same pair always gives the same order
        branches: Branch inputs to assemble

    Returns:
        List of Batch; every branch is padded to the batch's longest sequence

    Raises:
        ValidationError: Empty dataset or batch_size < 1
        FeatureError: A record without features
    """
    records = list(records)
    if not records:
        raise ValidationError("cannot batch an empty dataset")
    if batch_size < 1:
        raise ValidationError("batch_size must be positive")
    missing = [r.utterance_id for r in records if r.utterance_id not in features]
    if missing:
        raise FeatureError(f"no features for: {', '.join(missing)}", missing=missing)

    order = np.arange(len(records))
    if shuffle:
        order = np.random.default_rng([seed, epoch]).permutation(len(records))

    batches = []
    for start in range(0, len(order), batch_size):
        chunk = [records[i] for i in order[start:start + batch_size]]
        bundles = {b: [features[r.utterance_id][b] for r in chunk] for b in branches}
        num_frames = max(bundle.num_frames for group in bundles.values() for bundle in group)
        inputs = {b: BranchInputs.from_bundles(group, num_frames, dtype) for b, group in bundles.items()}
        targets = None
        if all(r.has_label for r in chunk):
            targets = torch.tensor([r.correctness / SCORE_SCALE for r in chunk], dtype=dtype)
        batches.append(Batch([r.utterance_id for r in chunk], inputs, targets))
    return batches


def predict_records(model, records, features):
    """PredictionRecords on the 0-100 scale for every record, in order."""
    results = []
    for record in records:
        bundles = features[record.utterance_id]
        prediction = predict(model, bundles.get('left'), bundles.get('right'))
        results.append(PredictionRecord(record.utterance_id, prediction.percent, record.correctness))
    return results


def _optimizer(model, cfg):
    if cfg.optimizer == 'sgd':
        return torch.optim.SGD(model.parameters(), lr=cfg.learning_rate)
    return torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)


def fit(model, train_records, dev_records, features, cfg, log_every=1):
    """
    Optimize ``model`` in place and keep the state with the best dev RMSE.

    Returns:
        (TrainReport without checkpoint path, best state_dict)

    Raises:
        TrainingDivergedError: Non-finite objective
    """
    optimizer = _optimizer(model, cfg)
    report = TrainReport(seed=cfg.seed, kind=model.kind, fusion_mode=model.fusion_mode)
    best_state = copy.deepcopy(model.state_dict())
    best_rmse = float('inf')
    stale_epochs = 0

    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        batches = make_batches(train_records, features, cfg.batch_size, cfg.seed, epoch, model.branches)
        total, squared_error = 0.0, 0.0
        for index, batch in enumerate(batches):
            optimizer.zero_grad()
            outputs = model(batch.inputs)
            loss = model.objective(outputs, batch.targets, cfg.loss_weights)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"objective became non-finite at epoch {epoch}, batch {index + 1} "
                    f"(utterances: {', '.join(batch.utterance_ids)}); try a lower learning_rate"
                )
            loss.backward()
            optimizer.step()
            total += loss.item() * len(batch)
            pooled = outputs['pooled'].detach().clamp(0.0, 1.0)
            squared_error += float(((pooled - batch.targets.clamp(0.0, 1.0)) ** 2).sum()) * SCORE_SCALE ** 2

        report.train_loss.append(total / len(train_records))
        report.train_rmse.append(float(np.sqrt(squared_error / len(train_records))))
        dev_rmse = rmse(predict_records(model, dev_records, features))
        report.dev_rmse.append(dev_rmse)

        improved = dev_rmse < best_rmse
        if improved:
            best_rmse, report.best_epoch = dev_rmse, epoch
            best_state = copy.deepcopy(model.state_dict())
            stale_epochs = 0
        else:
            stale_epochs += 1
        if epoch % log_every == 0 or improved:
            logger.info(
                "epoch %d: train loss %.6f, train RMSE %.2f, dev RMSE %.2f%s",
                epoch, report.train_loss[-1], report.train_rmse[-1], dev_rmse, ' (best)' if improved else '',
            )
        if stale_epochs >= cfg.early_stop_patience:
            logger.info("Early stop after %d epochs without dev improvement", stale_epochs)
            break

    report.best_dev_rmse = best_rmse
    return report, best_state


def _run(model, cfg, records, features, out_path, provider, feature_cfg, model_cfg, ssl_dim):
    train_records, dev_records = split_records(records, cfg.dev_fraction, cfg.seed)
    logger.info("Training %s model on %d utterances, %d dev", model.kind, len(train_records), len(dev_records))
    report, best_state = fit(model, train_records, dev_records, features, cfg)
    model.load_state_dict(best_state)
    model.eval()
    report.provider = provider
    if out_path is not None:
        metadata = checkpoint_metadata(model, feature_cfg, model_cfg, ssl_dim, provider, cfg.seed)
        save_checkpoint(out_path, model, metadata)
        report.checkpoint_path = str(out_path)
    return report


def _ssl_dim(features, records, branches):
    dims = {features[r.utterance_id][b].ssl.dim for r in records for b in branches}
    if len(dims) != 1:
        raise FeatureError(f"embedding dimensions differ across utterances: {sorted(dims)}")
    return dims.pop()


def train(cfg, records, features, out_path=None, provider='mel-proxy', feature_cfg=None, model_cfg=None):
    """
    Train the two-branch predictor.

    Args:
        cfg: TrainConfig (fusion mode, loss weights, optimizer, seed ...)
        records: Manifest rows; train/dev splits are taken from them
        features: utterance_id -> branch -> FeatureBundle
        out_path: Checkpoint file for the best model, or None
        provider: Embedding provider name recorded in the checkpoint
        feature_cfg, model_cfg: FeatureConfig and ModelConfig

    Returns:
        (TrainReport, model holding the best weights)
    """
    feature_cfg = feature_cfg or FeatureConfig()
    model_cfg = model_cfg or ModelConfig()
    set_seed(cfg.seed)
    ssl_dim = _ssl_dim(features, [r for r in records if r.split != 'test'], ('left', 'right'))
    model = BinauralPredictor(feature_cfg, model_cfg, ssl_dim, cfg.fusion_mode)
    return _run(model, cfg, records, features, out_path, provider, feature_cfg, model_cfg, ssl_dim), model


def train_single_branch(cfg, records, features, ear, out_path=None, provider='mel-proxy',
                        feature_cfg=None, model_cfg=None):
    """
    Train one ear's branch with pooling only.

    The objective keeps the utterance term and that ear's frame term; only
    the ear's audio and audiogram reach the model.
    """
    feature_cfg = feature_cfg or FeatureConfig()
    model_cfg = model_cfg or ModelConfig()
    set_seed(cfg.seed)
    ssl_dim = _ssl_dim(features, [r for r in records if r.split != 'test'], (ear,))
    model = SingleBranchPredictor(feature_cfg, model_cfg, ssl_dim, ear)
    return _run(model, cfg, records, features, out_path, provider, feature_cfg, model_cfg, ssl_dim), model
