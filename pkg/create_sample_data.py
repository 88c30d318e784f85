"""
Script to create the synthetic binaural corpus for demonstration

Usage:
    python create_sample_data.py [out_dir] [--seed N]
"""
import argparse
import logging
import sys

# Fix Windows console encoding
if sys.platform == 'win32':
    sys.stdout.reconfigure(encoding='utf-8')

from binscore import settings
from intelligibility.synthetic import write_synthetic_corpus

parser = argparse.ArgumentParser(description='Write the synthetic binaural corpus')
parser.add_argument('out_dir', nargs='?', default='sample_data', help='Output directory (default: %(default)s)')
parser.add_argument('--seed', type=int, default=settings.SEED)
parser.add_argument('--train', type=int, default=8, help='Train utterances')
parser.add_argument('--dev', type=int, default=2, help='Dev utterances')
parser.add_argument('--test', type=int, default=2, help='Test utterances')
args = parser.parse_args()

logging.basicConfig(stream=sys.stderr, level=settings.LOG_LEVEL)

result = write_synthetic_corpus(args.out_dir, args.train, args.dev, args.test, seed=args.seed)

for record in result['records']:
    print(f"✓ Created {record.split:<5} {record.utterance_id} (listener {record.listener_id}, score {record.correctness:.2f})")

print("\n" + "="*60)
print("Sample data created successfully!")
print("="*60)
print(f"Manifest:   {result['manifest']}")
print(f"Audiograms: {result['audiograms']}")
print(f"\nNext: binscore features --manifest {result['manifest']} --audiograms {result['audiograms']} "
      f"--provider mel-proxy --out-dir {args.out_dir}/features")
