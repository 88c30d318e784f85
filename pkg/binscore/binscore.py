#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
binscore CLI tool

Usage:
    binscore simulate-hl --in in.wav --audiogram audiograms.json --listener L0001 --ear left --out out.wav
    binscore features --manifest manifest.csv --audiograms audiograms.json --provider mel-proxy --out-dir features/
    binscore train --manifest manifest.csv --audiograms audiograms.json --provider mel-proxy --out model.ckpt
    binscore predict --ckpt model.ckpt --manifest manifest.csv --audiograms audiograms.json --provider mel-proxy --out preds.csv
    binscore evaluate --preds preds.csv --out metrics.json [--scatter scatter.csv]
    binscore compare --preds binaural=a.csv left=b.csv --out table.csv

Exit codes:
    0 success, 2 invalid input, 3 runtime failure (e.g. training diverged)

Diagnostics go to stderr; results are written to the files named by the flags.
"""

import argparse
import logging
import sys
from pathlib import Path

# Make stdout line buffered for real-time progress output
if hasattr(sys.stdout, 'reconfigure'):
    sys.stdout.reconfigure(line_buffering=True)

from binscore import settings
from intelligibility import corpus, evaluation
from intelligibility.config import feature_config_from_dict, load_config
from intelligibility.exceptions import (
    AudiogramError,
    BinscoreError,
    FeatureError,
    ProviderError,
    ValidationError,
)
from intelligibility.features.embeddings import available_providers, create_provider
from intelligibility.features.extraction import compute_feature_set, extract_corpus, load_feature_set
from intelligibility.hearing_loss import HearingLossConfig, apply_hearing_loss
from intelligibility.network.checkpoint import load_checkpoint
from intelligibility.training import predict_records, train, train_single_branch

logger = logging.getLogger('binscore')

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FAILURE = 3


def configure_logging(level):
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(levelname)s %(name)s: %(message)s',
    )


def make_provider(args):
    """Instantiate the provider named by --provider (with --archive for precomputed)."""
    options = {}
    if args.provider == 'precomputed':
        options['archive_dir'] = args.archive
    return create_provider(args.provider, **options)


def load_corpus(args):
    """Manifest rows and listener profiles, with every listener resolved."""
    records = corpus.load_manifest(args.manifest)
    profiles = corpus.load_audiograms(args.audiograms)
    corpus.check_listeners(records, profiles)
    return records, profiles


def report_missing(error):
    if error.missing:
        print(f"✗ {len(error.missing)} missing entr{'y' if len(error.missing) == 1 else 'ies'}:", file=sys.stderr)
        for key in error.missing:
            print(f"  - {key}", file=sys.stderr)


def cmd_simulate_hl(args):
    """Write the hearing-loss-processed version of one ear of a binaural WAV."""
    profiles = corpus.load_audiograms(args.audiogram)
    if args.listener not in profiles:
        raise AudiogramError(f"unknown listener id '{args.listener}'")
    sig = corpus.load_binaural_wav(args.input)
    left, right = corpus.split_channels(sig)
    ear = left if args.ear == 'left' else right

    cfg = HearingLossConfig.for_sample_rate(sig.sample_rate_hz, smearing_enabled=args.smearing)
    heard = apply_hearing_loss(ear, profiles[args.listener].ear(args.ear), cfg)
    corpus.write_wav(heard, args.out)

    print(f"✓ Simulated hearing loss for {args.listener} ({args.ear} ear) -> {args.out}")
    return EXIT_OK


def cmd_features(args):
    """Extract and cache per-branch feature bundles for every manifest row."""
    records, profiles = load_corpus(args)
    run_cfg = load_config(args.config)
    provider = make_provider(args)

    print(f"Extracting features for {len(records)} utterances")
    print(f"{'='*60}")
    print(f"Provider:   {args.provider}")
    print(f"Output dir: {args.out_dir}")
    print(f"{'='*60}")

    try:
        counts = extract_corpus(
            records, args.manifest, profiles, provider, run_cfg.features, args.out_dir,
            force=args.force, workers=args.workers,
        )
    except FeatureError as e:
        report_missing(e)
        raise

    print(f"✓ {counts['written']} bundle(s) written, {counts['skipped']} up to date")
    return EXIT_OK


def _feature_set(args, records, profiles, provider, feature_cfg, branches):
    if args.features_dir:
        extract_corpus(records, args.manifest, profiles, provider, feature_cfg, args.features_dir,
                       workers=args.workers, branches=branches)
        return load_feature_set(records, args.features_dir, branches)
    return compute_feature_set(records, args.manifest, profiles, provider, feature_cfg, branches)


def cmd_train(args):
    """Train a binaural (or, with --ear, single-branch) predictor."""
    records, profiles = load_corpus(args)
    run_cfg = load_config(args.config, train__seed=args.seed)
    provider = make_provider(args)
    branches = (args.ear,) if args.ear else ('left', 'right')
    training_rows = [r for r in records if r.split != 'test']

    print(f"Training {'single-' + args.ear if args.ear else 'binaural'} model")
    print(f"{'='*60}")
    print(f"Utterances: {len(training_rows)}")
    print(f"Provider:   {args.provider}")
    print(f"Fusion:     {'none' if args.ear else run_cfg.train.fusion_mode}")
    print(f"Seed:       {run_cfg.train.seed}")
    print(f"{'='*60}")

    try:
        features = _feature_set(args, training_rows, profiles, provider, run_cfg.features, branches)
    except FeatureError as e:
        report_missing(e)
        raise

    common = dict(
        out_path=args.out, provider=args.provider, feature_cfg=run_cfg.features, model_cfg=run_cfg.model,
    )
    if args.ear:
        report, _ = train_single_branch(run_cfg.train, training_rows, features, args.ear, **common)
    else:
        report, _ = train(run_cfg.train, training_rows, features, **common)

    report_path = Path(args.report) if args.report else Path(f"{args.out}.report.json")
    report.write_json(report_path)

    print(f"\n{'='*60}")
    print(f"✓ Best dev RMSE {report.best_dev_rmse:.2f} at epoch {report.best_epoch}")
    print(f"  Checkpoint: {args.out}")
    print(f"  Report:     {report_path}")
    print(f"{'='*60}")
    return EXIT_OK


def cmd_predict(args):
    """Score every manifest row with a trained checkpoint."""
    model, metadata = load_checkpoint(args.ckpt)
    if metadata['provider'] != args.provider:
        raise ProviderError(
            f"checkpoint was trained with provider '{metadata['provider']}', got '{args.provider}'"
        )
    records, profiles = load_corpus(args)
    provider = make_provider(args)
    feature_cfg = feature_config_from_dict(metadata['feature_config'])

    try:
        features = _feature_set(args, records, profiles, provider, feature_cfg, model.branches)
    except FeatureError as e:
        report_missing(e)
        raise
    dims = {bundle.ssl.dim for branches in features.values() for bundle in branches.values()}
    if dims != {metadata['ssl_dim']}:
        raise ProviderError(
            f"provider produces embeddings of dimension {sorted(dims)}, checkpoint expects {metadata['ssl_dim']}"
        )

    predictions = predict_records(model, records, features)
    evaluation.write_predictions(predictions, args.out)
    print(f"✓ {len(predictions)} prediction(s) written to {args.out}")
    return EXIT_OK


def cmd_evaluate(args):
    """Compute RMSE, STDERR and LCC over a predictions file."""
    records = evaluation.read_predictions(args.preds)
    labeled = [r for r in records if r.truth is not None]
    if len(labeled) < len(records):
        logger.warning("%d row(s) without truth excluded", len(records) - len(labeled))

    report = evaluation.summarize(labeled)
    evaluation.write_report(report, args.out)
    if args.scatter:
        evaluation.export_scatter(labeled, args.scatter)

    lcc = 'undefined' if report.lcc is None else f"{report.lcc:.3f}"
    print(f"{'='*60}")
    print(f"n={report.n}  RMSE={report.rmse:.2f}  STDERR={report.stderr:.2f}  LCC={lcc}")
    print(f"{'='*60}")
    print(f"✓ Metrics written to {args.out}")
    return EXIT_OK


def parse_named_paths(values):
    systems = {}
    for value in values:
        name, sep, path = value.partition('=')
        if not sep or not name or not path:
            raise ValidationError(f"expected name=path, got '{value}'")
        if name in systems:
            raise ValidationError(f"system '{name}' given twice")
        systems[name] = path
    return systems


def cmd_compare(args):
    """Tabulate metrics of several prediction files side by side."""
    systems = {name: evaluation.read_predictions(path) for name, path in parse_named_paths(args.preds).items()}
    rows = evaluation.compare_systems(systems)
    evaluation.write_comparison(rows, args.out)

    print(f"{'System':<20} {'RMSE':>8} {'STDERR':>8} {'LCC':>8} {'n':>6}")
    print(f"{'='*54}")
    for row in rows:
        lcc = '-' if row['lcc'] is None else f"{row['lcc']:.2f}"
        print(f"{row['system']:<20} {row['rmse']:>8.2f} {row['stderr']:>8.2f} {lcc:>8} {row['n']:>6}")
    print(f"✓ Comparison written to {args.out}")
    return EXIT_OK


def add_corpus_arguments(parser):
    parser.add_argument('--manifest', required=True, help='Manifest CSV')
    parser.add_argument('--audiograms', required=True, help='Listener audiogram JSON')


def add_provider_arguments(parser):
    parser.add_argument('--provider', required=True, choices=available_providers(),
                        help='Embedding provider')
    parser.add_argument('--archive', default=settings.EMBEDDING_ARCHIVE or None,
                        help='Embedding archive directory (precomputed provider)')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='binscore',
        description='Binaural speech-intelligibility prediction for hearing-aid users',
    )
    parser.add_argument('--seed', type=int, default=None, help='Seed overriding config and environment')
    parser.add_argument('--log-level', default=settings.LOG_LEVEL, help='Logging level (default: %(default)s)')
    subparsers = parser.add_subparsers(dest='command', help='Command to run')

    sim = subparsers.add_parser('simulate-hl', help='Apply a listener\'s hearing loss to one ear of a WAV')
    sim.add_argument('--in', dest='input', required=True, help='Binaural input WAV')
    sim.add_argument('--audiogram', required=True, help='Listener audiogram JSON')
    sim.add_argument('--listener', required=True, help='Listener id')
    sim.add_argument('--ear', required=True, choices=['left', 'right'])
    sim.add_argument('--out', required=True, help='Mono output WAV')
    sim.add_argument('--smearing', action='store_true', help='Enable spectral smearing')

    feat = subparsers.add_parser('features', help='Extract and cache feature bundles')
    add_corpus_arguments(feat)
    add_provider_arguments(feat)
    feat.add_argument('--out-dir', required=True, help='Bundle directory')
    feat.add_argument('--config', help='INI run configuration ([features] section)')
    feat.add_argument('--force', action='store_true', help='Rewrite up-to-date bundles')
    feat.add_argument('--workers', type=int, default=settings.WORKERS, help='Parallel utterances')

    tr = subparsers.add_parser('train', help='Train a predictor')
    add_corpus_arguments(tr)
    add_provider_arguments(tr)
    tr.add_argument('--config', help='INI run configuration')
    tr.add_argument('--out', required=True, help='Checkpoint path')
    tr.add_argument('--report', help='TrainReport JSON path (default: <out>.report.json)')
    tr.add_argument('--ear', choices=['left', 'right'], help='Train a single-branch model for one ear')
    tr.add_argument('--features-dir', help='Bundle cache directory')
    tr.add_argument('--workers', type=int, default=settings.WORKERS, help='Parallel utterances')

    pred = subparsers.add_parser('predict', help='Predict intelligibility scores')
    pred.add_argument('--ckpt', required=True, help='Checkpoint path')
    add_corpus_arguments(pred)
    add_provider_arguments(pred)
    pred.add_argument('--out', required=True, help='Predictions CSV')
    pred.add_argument('--features-dir', help='Bundle cache directory')
    pred.add_argument('--workers', type=int, default=settings.WORKERS, help='Parallel utterances')

    ev = subparsers.add_parser('evaluate', help='Compute metrics of a predictions file')
    ev.add_argument('--preds', required=True, help='Predictions CSV')
    ev.add_argument('--out', required=True, help='Metrics JSON')
    ev.add_argument('--scatter', help='Scatter CSV for plotting')

    cmp_parser = subparsers.add_parser('compare', help='Compare several systems')
    cmp_parser.add_argument('--preds', required=True, nargs='+', metavar='NAME=PATH', help='Prediction files')
    cmp_parser.add_argument('--out', required=True, help='Comparison CSV')

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        if args.command == 'simulate-hl':
            return cmd_simulate_hl(args)
        elif args.command == 'features':
            return cmd_features(args)
        elif args.command == 'train':
            return cmd_train(args)
        elif args.command == 'predict':
            return cmd_predict(args)
        elif args.command == 'evaluate':
            return cmd_evaluate(args)
        elif args.command == 'compare':
            return cmd_compare(args)
        else:
            parser.print_help()
            return EXIT_INVALID
    except ValidationError as e:
        print(f"✗ Error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except BinscoreError as e:
        print(f"✗ Error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
